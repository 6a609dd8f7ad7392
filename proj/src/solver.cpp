#include "ess/solver.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <memory>
#include <sstream>

namespace ess {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::limit: return "limit";
  }
  return "unknown";
}

const char* to_string(SolveMode m) { return m == SolveMode::bigm ? "bigm" : "lpcc"; }

int exit_code(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return 0;
    case SolveStatus::infeasible: return 2;
    case SolveStatus::unbounded: return 3;
    case SolveStatus::limit: return 4;
  }
  return 1;
}

void SolveOptions::validate() const {
  if (!(feasibility_tol > 0.0) || !(optimality_tol > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "solver tolerances must be positive");
  }
  if (relative_gap < 0.0) throw Error(ErrorCode::invalid_argument, "relative gap must be nonnegative");
  if (node_limit < 1 || !(time_limit > 0.0)) throw Error(ErrorCode::invalid_argument, "solver limits must be >= 1");
}

SimplexOptions SolveOptions::simplex() const {
  SimplexOptions s;
  s.feasibility_tol = feasibility_tol;
  s.optimality_tol = optimality_tol;
  s.anti_cycling = anti_cycling;
  return s;
}

namespace {

LpSolveStatus map_status(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return LpSolveStatus::optimal;
    case LpStatus::infeasible: return LpSolveStatus::infeasible;
    case LpStatus::unbounded: return LpSolveStatus::unbounded;
    default: return LpSolveStatus::failed;
  }
}

SolveStatus map_solve_status(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return SolveStatus::optimal;
    case LpStatus::infeasible: return SolveStatus::infeasible;
    case LpStatus::unbounded: return SolveStatus::unbounded;
    default: return SolveStatus::limit;
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SolveOptions& options) {
  options.validate();
  const MathModel model = lp.to_model();
  DenseSimplex simplex(model, options.simplex());
  const LpStatus st = simplex.solve();
  LpSolution sol;
  sol.status = map_status(st);
  sol.iterations = simplex.iterations();
  if (st != LpStatus::optimal) {
    if (st == LpStatus::numerical_failure || st == LpStatus::iteration_limit) {
      throw Error(ErrorCode::solver, std::string("LP solve failed: ") + to_string(st));
    }
    return sol;
  }
  sol.x = simplex.primal();
  sol.objective = simplex.objective();
  const std::vector<double> y = simplex.row_duals();
  sol.omega.assign(y.begin(), y.begin() + lp.g_count());
  sol.v.assign(y.begin() + lp.g_count(), y.end());
  sol.bound_duals = simplex.reduced_costs();
  return sol;
}

SolveResult solve_lp(const MathModel& model, const SolveOptions& options) {
  options.validate();
  const auto start = std::chrono::steady_clock::now();
  DenseSimplex simplex(model, options.simplex());
  const LpStatus st = simplex.solve();
  SolveResult res;
  res.status = map_solve_status(st);
  res.nodes = 1;
  res.lp_iterations = simplex.iterations();
  if (st == LpStatus::optimal) {
    res.x = simplex.primal();
    res.objective = simplex.objective();
    res.bound = res.objective;
    res.gap = 0.0;
    res.duals = simplex.row_duals();
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

namespace {

constexpr double kComplementarityTol = 1e-6;
constexpr double kIntegralityTol = 1e-6;

// For each complementarity pair: true when the primal slack is the side held at zero.
using Pattern = std::vector<char>;

// Solves the model with every complementarity pair pinned to one side.
// Keeps its simplex between calls so consecutive patterns warm start.
class PatternSolver {
 public:
  using Mapper = std::function<void(const Pattern&, std::vector<BoundChange>&)>;

  PatternSolver(const MathModel& model, SolveOptions options, Mapper mapper)
      : model_(model), options_(options), mapper_(std::move(mapper)) {}

  std::optional<std::vector<double>> solve(const Pattern& pattern) {
    changes_.clear();
    mapper_(pattern, changes_);
    for (int attempt = 0; attempt < 2; ++attempt) {
      const bool fresh = !lp_;
      if (fresh) lp_ = std::make_unique<DenseSimplex>(model_, options_.simplex());
      for (const auto& c : changes_) lp_->set_bounds(c.var, c.lb, c.ub);
      const LpStatus st = fresh ? lp_->solve() : lp_->resolve();
      if (st == LpStatus::optimal) return lp_->primal();
      if (st == LpStatus::infeasible) return std::nullopt;
      lp_.reset();
    }
    return std::nullopt;
  }

 private:
  const MathModel& model_;
  SolveOptions options_;
  Mapper mapper_;
  std::unique_ptr<DenseSimplex> lp_;
  std::vector<BoundChange> changes_;
};

double slack_at(const MpecModel& mp, const ComplementarityPair& pair, const std::vector<double>& rows) {
  return rows[pair.g_row] - mp.model.row_lb[pair.g_row];
}

Pattern pattern_from_node(const MpecModel& mp, const NodeView& view) {
  Pattern p(mp.pairs.size());
  for (std::size_t i = 0; i < mp.pairs.size(); ++i) {
    const auto& pair = mp.pairs[i];
    p[i] = slack_at(mp, pair, view.rows) < view.cols[pair.dual_col] ? 1 : 0;
  }
  return p;
}

// Bilevel-feasible pattern: solve each lower level at the node's division and
// read off which side of every pair its optimal solution holds at zero. One
// warm-started simplex per block; capacity changes are row-bound changes.
class LowerLevelProbe {
 public:
  LowerLevelProbe(const MpecModel& mp, const SolveOptions& options) : mp_(mp), options_(options) {
    for (const auto& block : mp.blocks) {
      Slot slot;
      slot.lp = block.kkt.primal.at_capacity(0.0);
      slot.model = std::make_unique<MathModel>(slot.lp.to_model());
      slot.g_fixed = slot.lp.g_rhs_fixed();
      slot.h_fixed = slot.lp.h_rhs_fixed();
      slots_.push_back(std::move(slot));
    }
  }

  // Optimal lower-level objective of block b at capacity cap.
  std::optional<double> value(std::size_t b, double cap) {
    Slot& slot = slots_[b];
    cap = std::max(0.0, cap);
    if (!slot.valid || cap != slot.capacity) {
      if (!solve_block(slot, cap)) return std::nullopt;
    }
    return slot.objective;
  }

  std::optional<Pattern> pattern(const std::vector<double>& cols) {
    Pattern p(mp_.pairs.size(), 0);
    std::size_t offset = 0;
    for (std::size_t b = 0; b < slots_.size(); ++b) {
      Slot& slot = slots_[b];
      const double cap = std::max(0.0, cols[mp_.blocks[b].capacity_col]);
      if (!slot.valid || cap != slot.capacity) {
        if (!solve_block(slot, cap)) return std::nullopt;
      }
      std::copy(slot.pattern.begin(), slot.pattern.end(), p.begin() + static_cast<long>(offset));
      offset += slot.pattern.size();
    }
    return p;
  }

 private:
  struct Slot {
    LinearProgram lp;
    std::unique_ptr<MathModel> model;
    std::unique_ptr<DenseSimplex> simplex;
    std::vector<double> g_fixed, h_fixed;
    double capacity = 0.0;
    bool valid = false;
    Pattern pattern;
    double objective = 0.0;
  };

  bool solve_block(Slot& slot, double cap) {
    slot.valid = false;
    const int n = slot.lp.var_count();
    const int ng = slot.lp.g_count();
    std::vector<double> g = slot.g_fixed, h = slot.h_fixed;
    for (const auto& mk : slot.lp.markers) (mk.equality ? h : g)[mk.row] += mk.coefficient * cap;
    for (int attempt = 0; attempt < 2; ++attempt) {
      const bool fresh = !slot.simplex;
      if (fresh) slot.simplex = std::make_unique<DenseSimplex>(*slot.model, options_.simplex());
      for (int i = 0; i < ng; ++i) slot.simplex->set_bounds(n + i, g[i], kInf);
      for (int i = 0; i < slot.lp.h_count(); ++i) slot.simplex->set_bounds(n + ng + i, h[i], h[i]);
      const LpStatus st = fresh ? slot.simplex->solve() : slot.simplex->resolve();
      if (st == LpStatus::optimal) break;
      slot.simplex.reset();
      if (st == LpStatus::infeasible || attempt == 1) return false;
    }
    const std::vector<double> rows = slot.simplex->row_activity();
    slot.pattern.assign(ng, 0);
    for (int i = 0; i < ng; ++i) {
      const double scale = 1.0 + std::abs(g[i]);
      slot.pattern[i] = rows[i] - g[i] <= 1e-9 * scale ? 1 : 0;
    }
    slot.objective = slot.simplex->objective();
    slot.capacity = cap;
    slot.valid = true;
    return true;
  }

  const MpecModel& mp_;
  SolveOptions options_;
  std::vector<Slot> slots_;
};

// Each lower-level value function phi(S) is convex in the capacity S (the
// capacity only moves right-hand sides), so on [0, S_max] it lies below its
// secant: c.x <= phi(0) + (phi(S_max) - phi(0)) S / S_max holds at every
// bilevel-feasible point. Appending these rows tightens node relaxations.
void add_value_function_rows(const MpecModel& mp, MathModel& model, const SolveOptions& options) {
  for (const auto& block : mp.blocks) {
    const double s_max = mp.model.col_ub[block.capacity_col];
    if (!(s_max > 0.0) || !std::isfinite(s_max)) continue;
    const LinearProgram& lp = block.kkt.primal;
    LpSolution lo, hi;
    try {
      lo = solve_lp(lp.at_capacity(0.0), options);
      hi = solve_lp(lp.at_capacity(s_max), options);
    } catch (const Error&) {
      continue;
    }
    if (lo.status != LpSolveStatus::optimal || hi.status != LpSolveStatus::optimal) continue;
    SparseRow row;
    for (int j = 0; j < lp.var_count(); ++j) row.add(block.x_begin + j, lp.cost[j]);
    row.add(block.capacity_col, -(hi.objective - lo.objective) / s_max);
    const double slack = 1e-9 * (1.0 + std::abs(lo.objective) + std::abs(hi.objective));
    model.add_row("vf_" + std::to_string(&block - mp.blocks.data()), std::move(row), -kInf, lo.objective + slack);
  }
}

// Picks the complementarity pair to branch on by the product of the two
// children's estimated LP gains. Estimates are pseudo-costs (gain per unit of
// the quantity forced to zero) learned from earlier children; a pair without
// history borrows the running mean of its side.
class PairBrancher {
 public:
  explicit PairBrancher(const MpecModel& mp)
      : mp_(mp), sum_{Series(mp.pairs.size(), 0.0), Series(mp.pairs.size(), 0.0)},
        count_{std::vector<int>(mp.pairs.size(), 0), std::vector<int>(mp.pairs.size(), 0)},
        prior_{1000.0 / default_dual_big_m(mp.instance), 1.0} {}

  struct Choice {
    int pair = -1;
    bool dual_first = true;
    int tag = -1;
  };

  std::optional<Choice> choose(const NodeView& view) {
    int best = -1;
    double best_score = 0.0, best_w = 0.0, best_g = 0.0, best_ed = 0.0, best_es = 0.0;
    for (std::size_t i = 0; i < mp_.pairs.size(); ++i) {
      const auto& pair = mp_.pairs[i];
      const double w = view.cols[pair.dual_col];
      const double g = slack_at(mp_, pair, view.rows);
      if (std::min(w, g) <= kComplementarityTol) continue;
      const double ed = unit_gain(kDual, i) * w;
      const double es = unit_gain(kSlack, i) * g;
      const double score = std::max(ed, 1e-12) * std::max(es, 1e-12);
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(i);
        best_w = w;
        best_g = g;
        best_ed = ed;
        best_es = es;
      }
    }
    if (best < 0) return std::nullopt;
    Choice c{best, best_ed <= best_es, static_cast<int>(log_.size())};
    log_.push_back({best, c.dual_first, best_w, best_g});
    return c;
  }

  void observe(int tag, int side, double gain) {
    if (tag < 0 || tag >= static_cast<int>(log_.size()) || !std::isfinite(gain)) return;
    const Entry& e = log_[tag];
    const bool dual_zeroed = (side == 0) == e.dual_first;
    const int which = dual_zeroed ? kDual : kSlack;
    const double amount = dual_zeroed ? e.w : e.g;
    if (amount <= 0.0) return;
    sum_[which][e.pair] += gain / amount;
    ++count_[which][e.pair];
    total_[which] += gain / amount;
    ++total_count_[which];
  }

 private:
  static constexpr int kDual = 0, kSlack = 1;
  struct Entry {
    int pair;
    bool dual_first;
    double w, g;
  };

  double unit_gain(int which, std::size_t i) const {
    if (count_[which][i] > 0) return sum_[which][i] / count_[which][i];
    if (total_count_[which] > 0) return total_[which] / total_count_[which];
    return prior_[which];
  }

  const MpecModel& mp_;
  std::array<Series, 2> sum_;
  std::array<std::vector<int>, 2> count_;
  std::array<double, 2> total_{0.0, 0.0};
  std::array<long, 2> total_count_{0, 0};
  std::array<double, 2> prior_;
  std::vector<Entry> log_;
};

// Secants of each lower-level value function over the dyadic subintervals of
// [0, S_max], down to kSecantDepth halvings. Every row is created free; a
// node whose capacity bounds equal a subinterval activates that row through
// a row-bound change, so the branch-and-bound core only ever moves bounds.
// Once the interval lies on one linear piece of phi the secant is exact.
class SecantPool {
 public:
  static constexpr int kSecantDepth = 5;

  SecantPool(const MpecModel& mp, MathModel& work, LowerLevelProbe& probe) : mp_(mp), probe_(probe) {
    const int cells = 1 << kSecantDepth;
    for (std::size_t b = 0; b < mp.blocks.size(); ++b) {
      const LowerBlock& block = mp.blocks[b];
      const double s_max = mp.model.col_ub[block.capacity_col];
      if (!(s_max > 0.0) || !std::isfinite(s_max) || mp.model.col_lb[block.capacity_col] != 0.0) continue;
      Series phi(cells + 1);
      bool ok = true;
      for (int i = 0; i <= cells && ok; ++i) {
        const auto v = probe.value(b, s_max * i / cells);
        ok = v.has_value();
        if (ok) phi[i] = *v;
      }
      if (!ok) continue;
      Entry e;
      e.block = static_cast<int>(b);
      e.s_max = s_max;
      e.rows.resize(kSecantDepth + 1);
      for (int j = 1; j <= kSecantDepth; ++j) {
        const int span = cells >> j;
        for (int k = 0; k < (1 << j); ++k) {
          const double l = s_max * (k * span) / cells, u = s_max * ((k + 1) * span) / cells;
          const double fl = phi[k * span], fu = phi[(k + 1) * span];
          const double a = (fu - fl) / (u - l);
          SparseRow row;
          const LinearProgram& lp = block.kkt.primal;
          for (int x = 0; x < lp.var_count(); ++x) row.add(block.x_begin + x, lp.cost[x]);
          row.add(block.capacity_col, -a);
          const double rhs = fl - a * l + 1e-9 * (1.0 + std::abs(fl) + std::abs(fu));
          const int r = work.row_count();
          work.add_row("sec_" + std::to_string(b) + "_" + std::to_string(j) + "_" + std::to_string(k), std::move(row),
                       -kInf, kInf);
          e.rows[j].push_back({r, rhs});
        }
      }
      entries_.push_back(std::move(e));
    }
  }

  // Largest lower-level optimality violation c.x_b - phi_b(S_b) at the node,
  // relative to 1 + |phi|; nullopt when some block cannot be evaluated.
  std::optional<double> worst_violation(const NodeView& view) {
    double worst = 0.0;
    for (std::size_t b = 0; b < mp_.blocks.size(); ++b) {
      const LowerBlock& block = mp_.blocks[b];
      const auto phi = probe_.value(b, view.cols[block.capacity_col]);
      if (!phi) return std::nullopt;
      const LinearProgram& lp = block.kkt.primal;
      double cx = 0.0;
      for (int x = 0; x < lp.var_count(); ++x) cx += lp.cost[x] * view.cols[block.x_begin + x];
      const double v = (cx - *phi) / (1.0 + std::abs(*phi));
      worst = std::max(worst, v);
    }
    return worst;
  }

  // Halves the capacity interval of the pooled block with the largest
  // violation above tol; nullopt when no pooled block qualifies.
  std::optional<BranchDecision> split(const NodeView& view, double tol, int n) {
    int best = -1;
    double best_v = tol;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      const int col = mp_.blocks[e.block].capacity_col;
      if (level_of(e, view.lower[col], view.upper[col]) >= kSecantDepth) continue;
      const auto phi = probe_.value(e.block, view.cols[col]);
      if (!phi) continue;
      const LinearProgram& lp = mp_.blocks[e.block].kkt.primal;
      double cx = 0.0;
      for (int x = 0; x < lp.var_count(); ++x) cx += lp.cost[x] * view.cols[mp_.blocks[e.block].x_begin + x];
      const double v = (cx - *phi) / (1.0 + std::abs(*phi));
      if (v > best_v) {
        best_v = v;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return std::nullopt;
    const Entry& e = entries_[best];
    const int col = mp_.blocks[e.block].capacity_col;
    const double lo = view.lower[col], hi = view.upper[col];
    const int j = level_of(e, lo, hi) + 1;
    const double width = e.s_max / (1 << j);
    const int k = static_cast<int>(std::lround(lo / width));
    const double mid = e.s_max * (2 * k + 1) / (1 << j);
    const SecantRow& left = e.rows[j][k];
    const SecantRow& right = e.rows[j][k + 1];
    std::vector<BoundChange> lower_half{{col, lo, mid}, {n + left.row, -kInf, left.rhs}};
    std::vector<BoundChange> upper_half{{col, mid, hi}, {n + right.row, -kInf, right.rhs}};
    BranchDecision d;
    const bool left_first = view.cols[col] <= mid;
    d.first = left_first ? lower_half : upper_half;
    d.second = left_first ? upper_half : lower_half;
    return d;
  }

 private:
  struct SecantRow {
    int row;
    double rhs;
  };
  struct Entry {
    int block = 0;
    double s_max = 0.0;
    std::vector<std::vector<SecantRow>> rows;  // [level][cell]; level 0 unused
  };

  // Halving level of [lo, hi] inside [0, s_max]; kSecantDepth when not dyadic.
  static int level_of(const Entry& e, double lo, double hi) {
    const double len = hi - lo;
    if (!(len > 0.0)) return kSecantDepth;
    for (int j = 0; j < kSecantDepth; ++j) {
      const double width = e.s_max / (1 << j);
      if (std::abs(len - width) <= 1e-12 * e.s_max) return j;
    }
    return kSecantDepth;
  }

  const MpecModel& mp_;
  LowerLevelProbe& probe_;
  std::vector<Entry> entries_;
};

// Completes a node point whose primal part is already lower-level optimal:
// keeps every primal column, and finds multipliers that vanish on slack rows
// (minimum total omega). Warm-started across calls.
class DualCompleter {
 public:
  DualCompleter(const MpecModel& mp, const SolveOptions& options) : mp_(mp), options_(options), model_(mp.model) {
    dual_.assign(model_.cols(), 0);
    for (const auto& b : mp.blocks) {
      for (int i = 0; i < b.kkt.omega_count(); ++i) dual_[b.omega_begin + i] = 1;
      for (int i = 0; i < b.kkt.v_count(); ++i) dual_[b.v_begin + i] = 2;
    }
    model_.offset = 0.0;
    for (int j = 0; j < model_.cols(); ++j) model_.cost[j] = dual_[j] == 1 ? 1.0 : 0.0;
    pair_of_dual_.assign(model_.cols(), -1);
    for (std::size_t i = 0; i < mp.pairs.size(); ++i) pair_of_dual_[mp.pairs[i].dual_col] = static_cast<int>(i);
  }

  std::optional<std::vector<double>> complete(const NodeView& view) {
    const int n = model_.cols();
    for (int attempt = 0; attempt < 2; ++attempt) {
      const bool fresh = !lp_;
      if (fresh) lp_ = std::make_unique<DenseSimplex>(model_, options_.simplex());
      for (int j = 0; j < n; ++j) {
        if (!dual_[j]) {
          lp_->set_bounds(j, view.cols[j], view.cols[j]);
        } else if (pair_of_dual_[j] >= 0) {
          const auto& pair = mp_.pairs[pair_of_dual_[j]];
          const double g = slack_at(mp_, pair, view.rows);
          const double tight = 1e-7 * (1.0 + std::abs(mp_.model.row_lb[pair.g_row]));
          lp_->set_bounds(j, 0.0, g <= tight ? kInf : 0.0);
        }
      }
      const LpStatus st = fresh ? lp_->solve() : lp_->resolve();
      if (st == LpStatus::optimal) return lp_->primal();
      lp_.reset();
      if (st == LpStatus::infeasible) return std::nullopt;
    }
    return std::nullopt;
  }

 private:
  const MpecModel& mp_;
  SolveOptions options_;
  MathModel model_;
  std::vector<char> dual_;
  std::vector<int> pair_of_dual_;
  std::unique_ptr<DenseSimplex> lp_;
};

}  // namespace

SolveResult solve_lpcc(const MpecModel& mp, const SolveOptions& options) {
  options.validate();
  const int n = mp.model.cols();
  auto mapper = [&mp, n](const Pattern& p, std::vector<BoundChange>& out) {
    for (std::size_t i = 0; i < mp.pairs.size(); ++i) {
      const auto& pair = mp.pairs[i];
      // The free side gets the model's own bounds back, never a widened box.
      const double lb = mp.model.row_lb[pair.g_row];
      if (p[i]) {
        out.push_back({pair.dual_col, mp.model.col_lb[pair.dual_col], mp.model.col_ub[pair.dual_col]});
        out.push_back({n + pair.g_row, lb, lb});
      } else {
        out.push_back({pair.dual_col, 0.0, 0.0});
        out.push_back({n + pair.g_row, lb, mp.model.row_ub[pair.g_row]});
      }
    }
  };
  PatternSolver fixer(mp.model, options, mapper);

  MathModel work = mp.model;
  if (options.value_function_rows) add_value_function_rows(mp, work, options);
  LowerLevelProbe probe(mp, options);
  std::optional<SecantPool> secants;
  if (options.value_function_rows) secants.emplace(mp, work, probe);
  DualCompleter completer(mp, options);
  constexpr double kLowerOptimalTol = 1e-9;

  BranchCallbacks cb;
  PairBrancher brancher(mp);
  long lower_optimal_node = -1;
  auto pair_branch = [&](const NodeView& view) -> std::optional<BranchDecision> {
    const auto c = brancher.choose(view);
    if (!c) return std::nullopt;
    const auto& pair = mp.pairs[c->pair];
    const double lb = mp.model.row_lb[pair.g_row];
    const BoundChange zero_dual{pair.dual_col, 0.0, 0.0};
    const BoundChange zero_slack{n + pair.g_row, lb, lb};
    BranchDecision d;
    d.first = {c->dual_first ? zero_dual : zero_slack};
    d.second = {c->dual_first ? zero_slack : zero_dual};
    d.tag = c->tag;
    return d;
  };
  cb.branch = [&](const NodeView& view) -> std::optional<BranchDecision> {
    if (secants) {
      if (auto d = secants->split(view, kLowerOptimalTol, n)) return d;
      const auto worst = secants->worst_violation(view);
      if (worst && *worst <= kLowerOptimalTol) {
        lower_optimal_node = view.node;
        return std::nullopt;
      }
    }
    return pair_branch(view);
  };
  cb.observe = [&](int tag, int side, double gain) { brancher.observe(tag, side, gain); };
  cb.polish = [&](const NodeView& view) -> std::optional<std::vector<double>> {
    if (lower_optimal_node == view.node) {
      if (auto y = completer.complete(view)) return y;
    }
    return fixer.solve(pattern_from_node(mp, view));
  };
  // Pair branching when a lower-optimal node cannot be completed.
  cb.fallback = [&](const NodeView& view) -> std::optional<BranchDecision> {
    if (lower_optimal_node != view.node) return std::nullopt;
    return pair_branch(view);
  };
  Pattern last_tried;
  cb.heuristic = [&](const NodeView& view) -> std::optional<std::vector<double>> {
    auto p = probe.pattern(view.cols);
    if (!p || *p == last_tried) return std::nullopt;
    last_tried = *p;
    return fixer.solve(*p);
  };
  return branch_and_bound(work, cb, options);
}

SolveResult solve_milp(const MilpModel& milp, const SolveOptions& options) {
  options.validate();
  const MathModel& model = milp.model;
  const MpecModel* mp = milp.source.get();
  std::vector<int> ints;
  for (int j = 0; j < model.cols(); ++j)
    if (model.integer[j]) ints.push_back(j);

  // Rounds/pins integer columns, then re-solves the continuous part.
  auto pin_ints = [&](const std::vector<double>& values, std::vector<BoundChange>& out) {
    for (std::size_t k = 0; k < ints.size(); ++k) {
      const double v = std::round(values[k]);
      out.push_back({ints[k], v, v});
    }
  };
  std::vector<double> pinned(ints.size());
  PatternSolver fixer(model, options, [&](const Pattern&, std::vector<BoundChange>& out) { pin_ints(pinned, out); });

  auto values_from_pattern = [&](const Pattern& p) {
    std::vector<double> vals(ints.size());
    for (std::size_t k = 0; k < ints.size(); ++k) vals[k] = 0.0;
    std::vector<int> slot(model.cols(), -1);
    for (std::size_t k = 0; k < ints.size(); ++k) slot[ints[k]] = static_cast<int>(k);
    for (std::size_t i = 0; i < p.size(); ++i) vals[slot[milp.pair_binary[i]]] = p[i] ? 1.0 : 0.0;
    return vals;
  };

  auto most_fractional = [&](const NodeView& view, bool skip_pairs) -> std::optional<BranchDecision> {
    int best = -1;
    double best_frac = kIntegralityTol;
    std::vector<char> is_pair(model.cols(), 0);
    if (skip_pairs)
      for (int u : milp.pair_binary) is_pair[u] = 1;
    for (int j : ints) {
      if (is_pair[j]) continue;
      const double v = view.cols[j];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      if (frac > best_frac) {
        best_frac = frac;
        best = j;
      }
    }
    if (best < 0) return std::nullopt;
    const double v = view.cols[best];
    const BoundChange down{best, model.col_lb[best], std::floor(v)};
    const BoundChange up{best, std::ceil(v), model.col_ub[best]};
    BranchDecision dec;
    const bool down_first = v - std::floor(v) <= 0.5;
    dec.first = {down_first ? down : up};
    dec.second = {down_first ? up : down};
    return dec;
  };

  BranchCallbacks cb;
  std::optional<PairBrancher> brancher;
  if (mp) {
    brancher.emplace(*mp);
    cb.observe = [&](int tag, int side, double gain) { brancher->observe(tag, side, gain); };
  }
  cb.fallback = [&](const NodeView& view) { return most_fractional(view, false); };
  cb.branch = [&](const NodeView& view) -> std::optional<BranchDecision> {
    if (mp && options.branching == BranchingRule::most_violated_complementarity) {
      // Pairs already complementary can be rounded; branch only on a violated one.
      if (const auto c = brancher->choose(view)) {
        const int u = milp.pair_binary[c->pair];
        const double first = c->dual_first ? 0.0 : 1.0;
        BranchDecision dec;
        dec.first = {{u, first, first}};
        dec.second = {{u, 1.0 - first, 1.0 - first}};
        dec.tag = c->tag;
        return dec;
      }
      // Non-pair integers (if any) still need integrality.
    }
    return most_fractional(view, mp && options.branching == BranchingRule::most_violated_complementarity);
  };
  cb.polish = [&](const NodeView& view) -> std::optional<std::vector<double>> {
    if (mp) {
      std::vector<double> vals(ints.size());
      for (std::size_t k = 0; k < ints.size(); ++k) vals[k] = view.cols[ints[k]];
      const Pattern p = pattern_from_node(*mp, view);
      const std::vector<double> from_pairs = values_from_pattern(p);
      std::vector<char> is_pair(model.cols(), 0);
      for (int u : milp.pair_binary) is_pair[u] = 1;
      for (std::size_t k = 0; k < ints.size(); ++k)
        if (is_pair[ints[k]]) vals[k] = from_pairs[k];
      pinned = vals;
      if (auto x = fixer.solve({})) return x;
    }
    for (std::size_t k = 0; k < ints.size(); ++k) pinned[k] = view.cols[ints[k]];
    return fixer.solve({});
  };
  std::optional<LowerLevelProbe> probe;
  Pattern last_tried;
  if (mp) {
    probe.emplace(*mp, options);
    cb.heuristic = [&](const NodeView& view) -> std::optional<std::vector<double>> {
      auto p = probe->pattern(view.cols);
      if (!p || *p == last_tried) return std::nullopt;
      last_tried = *p;
      std::vector<double> vals = values_from_pattern(*p);
      std::vector<char> is_pair(model.cols(), 0);
      for (int u : milp.pair_binary) is_pair[u] = 1;
      for (std::size_t k = 0; k < ints.size(); ++k)
        if (!is_pair[ints[k]]) vals[k] = std::round(view.cols[ints[k]]);
      pinned = vals;
      return fixer.solve({});
    };
  }
  MathModel work = model;
  if (mp && options.value_function_rows) add_value_function_rows(*mp, work, options);
  return branch_and_bound(work, cb, options);
}

ExtractedSolution extract_solution(const SolveResult& result, const MpecModel& mp) {
  if (!result.has_incumbent()) throw Error(ErrorCode::solver, "extract_solution: result has no incumbent");
  const std::vector<double>& x = result.x;
  if (static_cast<int>(x.size()) < mp.model.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "extract_solution: vector shorter than model");
  }
  const Instance& in = mp.instance;
  const int T = in.slots();
  const int N = in.customers();
  const LlmLayout at{T};
  ExtractedSolution out;
  out.division.s_disco = x[mp.disco_capacity_col];
  for (int c : mp.customer_capacity_cols) out.division.s_customer.push_back(x[c]);

  ScheduleSet& s = out.schedules;
  s.customer_ch.assign(N, Series(T));
  s.customer_dis.assign(N, Series(T));
  s.customer_peak.assign(N, 0.0);
  s.customer_valley.assign(N, 0.0);
  s.disco_ch.assign(T, 0.0);
  s.disco_dis.assign(T, 0.0);
  for (const auto& b : mp.blocks) {
    for (int t = 0; t < T; ++t) {
      const double ch = x[b.x_begin + at.charge(t)];
      const double dis = x[b.x_begin + at.discharge(t)];
      if (b.kind == BlockKind::customer) {
        s.customer_ch[b.customer][t] = ch;
        s.customer_dis[b.customer][t] = dis;
      } else {
        s.disco_ch[t] = ch;
        s.disco_dis[t] = dis;
      }
    }
    if (b.kind == BlockKind::customer) {
      s.customer_peak[b.customer] = x[b.x_begin + at.peak()];
      s.customer_valley[b.customer] = x[b.x_begin + at.valley()];
    }
    out.duals.omega.emplace_back(x.begin() + b.omega_begin, x.begin() + b.omega_begin + b.kkt.omega_count());
    out.duals.v.emplace_back(x.begin() + b.v_begin, x.begin() + b.v_begin + b.kkt.v_count());
  }
  s.system_peak = x[mp.peak_col];

  auto breach = [](const std::string& what, double amount) {
    std::ostringstream msg;
    msg << "extracted solution violates " << what << " by " << amount;
    throw Error(ErrorCode::verification, msg.str());
  };
  constexpr double tol = 1e-6;
  const double total = in.storage.total_capacity;
  if (out.division.s_disco < -tol) breach("division nonnegativity", -out.division.s_disco);
  for (double v : out.division.s_customer)
    if (v < -tol) breach("division nonnegativity", -v);
  if (out.division.total() > total + tol * std::max(1.0, total)) breach("capacity split", out.division.total() - total);
  const Series net = net_system_load(in, s);
  for (int t = 0; t < T; ++t) {
    const double gap = net[t] - s.system_peak;
    if (gap > tol * std::max(1.0, std::abs(net[t]))) breach("peak definition", gap);
  }
  for (const auto& b : mp.blocks) {
    const double cap = std::max(0.0, x[b.capacity_col]);
    const LinearProgram lp = b.kkt.primal.at_capacity(cap);
    std::vector<double> xb(x.begin() + b.x_begin, x.begin() + b.x_begin + lp.var_count());
    for (int i = 0; i < lp.g_count(); ++i) {
      const double g = lp.g_rows[i].dot(xb) - lp.g_rhs[i];
      if (g < -tol * std::max(1.0, std::abs(lp.g_rhs[i]))) breach("lower-level inequality", -g);
    }
    for (int i = 0; i < lp.h_count(); ++i) {
      const double h = std::abs(lp.h_rows[i].dot(xb) - lp.h_rhs[i]);
      if (h > tol) breach("energy balance", h);
    }
  }
  out.upper_objective = upper_objective(in, s);
  return out;
}

std::vector<double> normalize_duals(const MilpModel& milp, const std::vector<double>& x, const SolveOptions& options) {
  if (!milp.source || static_cast<int>(x.size()) != milp.model.cols()) return x;
  const MpecModel& mp = *milp.source;
  MathModel lp = milp.model;
  std::vector<char> dual(lp.cols(), 0);
  for (const auto& b : mp.blocks) {
    for (int i = 0; i < b.kkt.omega_count(); ++i) dual[b.omega_begin + i] = 1;
    for (int i = 0; i < b.kkt.v_count(); ++i) dual[b.v_begin + i] = 2;
  }
  lp.offset = 0.0;
  for (int j = 0; j < lp.cols(); ++j) {
    lp.integer[j] = 0;
    lp.cost[j] = dual[j] == 1 ? 1.0 : 0.0;
    if (!dual[j]) lp.col_lb[j] = lp.col_ub[j] = x[j];
  }
  DenseSimplex simplex(lp, options.simplex());
  if (simplex.solve() != LpStatus::optimal) return x;
  std::vector<double> y = simplex.primal();
  if (milp.model.max_violation(y) > 1e-6) return x;
  return y;
}

BilevelOutcome solve_bilevel(const Instance& instance, const BilevelRequest& req) {
  BilevelOutcome out;
  out.mode = req.mode;
  auto mp = std::make_shared<MpecModel>(assemble_mpec(instance));
  if (req.fixed_disco_capacity) mp->fix_capacity(mp->disco_capacity_col, *req.fixed_disco_capacity);

  if (req.mode == SolveMode::lpcc) {
    out.result = solve_lpcc(*mp, req.options);
  } else {
    BigMPolicy policy = req.big_m;
    double dual_m = policy.dual_default > 0.0 ? policy.dual_default : default_dual_big_m(instance);
    for (int round = 0;; ++round) {
      policy.dual_default = dual_m;
      const MilpModel milp = linearize_big_m(mp, policy);
      out.result = solve_milp(milp, req.options);
      out.big_m_rounds = round;
      out.final_dual_m = dual_m;
      if (!out.result.has_incumbent()) break;
      out.result.x = normalize_duals(milp, out.result.x, req.options);
      const BigMReport report = validate_big_m(milp, out.result.x);
      out.big_m_clean = report.clean();
      if (out.big_m_clean) break;
      if (round >= policy.max_rounds) {
        out.notes.push_back("big-M still binding after " + std::to_string(round) + " escalations");
        break;
      }
      out.notes.push_back("big-M binding on " + std::to_string(report.binding.size()) + " pairs; escalating");
      dual_m *= policy.escalation_factor;
    }
  }
  if (out.result.has_incumbent()) out.solution = extract_solution(out.result, *mp);
  return out;
}

}  // namespace ess
