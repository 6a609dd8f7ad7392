#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <queue>

#include "ess/solver.hpp"

namespace ess {

namespace {

struct Node {
  double bound = -kInf;
  long id = 0;
  int depth = 0;
  std::vector<BoundChange> changes;
  std::shared_ptr<const Basis> basis;
  int tag = -1, side = 0;
  double parent_objective = 0.0;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

std::vector<BoundChange> extend(const std::vector<BoundChange>& base, const std::vector<BoundChange>& more) {
  std::vector<BoundChange> out = base;
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

bool tightens(const DenseSimplex& lp, const std::vector<BoundChange>& changes) {
  for (const auto& c : changes) {
    if (c.lb > lp.lower(c.var) || c.ub < lp.upper(c.var)) return true;
  }
  return false;
}

}  // namespace

SolveResult branch_and_bound(const MathModel& model, const BranchCallbacks& cb, const SolveOptions& opt) {
  opt.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  const int n = model.cols();
  const int width = n + model.row_count();
  std::vector<double> root_lb(width), root_ub(width);
  for (int j = 0; j < n; ++j) {
    root_lb[j] = model.col_lb[j];
    root_ub[j] = model.col_ub[j];
  }
  for (int r = 0; r < model.row_count(); ++r) {
    root_lb[n + r] = model.row_lb[r];
    root_ub[n + r] = model.row_ub[r];
  }

  SolveResult res;
  auto lp = std::make_unique<DenseSimplex>(model, opt.simplex());
  std::vector<BoundChange> applied;
  auto apply_path = [&](const std::vector<BoundChange>& target) {
    for (const auto& c : applied) lp->set_bounds(c.var, root_lb[c.var], root_ub[c.var]);
    for (const auto& c : target) lp->set_bounds(c.var, c.lb, c.ub);
    applied = target;
  };
  long retired_iterations = 0;  // from simplex instances replaced by cold solves
  auto cold_solve = [&](const std::vector<BoundChange>& target) {
    retired_iterations += lp->iterations();
    lp = std::make_unique<DenseSimplex>(model, opt.simplex());
    applied.clear();
    for (const auto& c : target) lp->set_bounds(c.var, c.lb, c.ub);
    applied = target;
    return lp->solve();
  };

  double incumbent = kInf;
  auto prune_level = [&] {
    if (!std::isfinite(incumbent)) return kInf;
    const double tol = std::max(opt.optimality_tol * std::max(1.0, std::abs(incumbent)),
                                opt.relative_gap * std::abs(incumbent));
    return incumbent - tol;
  };
  auto offer = [&](const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != n) return;
    if (model.max_violation(x) > 1e-6) return;
    for (int j = 0; j < n; ++j) {
      if (model.integer[j] && std::abs(x[j] - std::round(x[j])) > 1e-6) return;
    }
    const double value = model.objective(x);
    if (value < incumbent) {
      incumbent = value;
      res.x = x;
    }
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 1;
  Node cur;
  bool have_cur = true;
  LpStatus st = lp->solve();
  bool limit_hit = false;

  auto open_bound = [&](bool include_cur) {
    double b = open.empty() ? kInf : open.top().bound;
    if (include_cur && have_cur) b = std::min(b, cur.bound);
    return b;
  };

  for (;;) {
    if (!have_cur) {
      while (!open.empty() && open.top().bound >= prune_level()) open = {};
      if (open.empty()) break;
      cur = open.top();
      open.pop();
      have_cur = true;
      apply_path(cur.changes);
      if (cur.basis && !lp->dual_feasible()) lp->load_basis(*cur.basis);
      st = lp->resolve();
    } else if (res.nodes > 0) {
      st = lp->resolve();
    }
    if (st == LpStatus::numerical_failure || st == LpStatus::iteration_limit) st = cold_solve(cur.changes);

    ++res.nodes;
    if (cb.observe && cur.tag >= 0) {
      if (st == LpStatus::optimal) cb.observe(cur.tag, cur.side, std::max(0.0, lp->objective() - cur.parent_objective));
      else if (st == LpStatus::infeasible) cb.observe(cur.tag, cur.side, kInf);
    }
    if (st == LpStatus::unbounded && res.nodes == 1) {
      res.status = SolveStatus::unbounded;
      res.wall_seconds = elapsed();
      return res;
    }
    bool expanded = false;
    if (st == LpStatus::optimal) {
      const double z = lp->objective();
      const double node_bound = std::max(cur.bound, z);
      if (node_bound < prune_level()) {
        const std::vector<double> cols = lp->primal();
        const std::vector<double> rows = lp->row_activity();
        std::vector<double> lower(n), upper(n);
        for (int j = 0; j < n; ++j) {
          lower[j] = lp->lower(j);
          upper[j] = lp->upper(j);
        }
        const NodeView view{cols, rows, lower, upper, z, res.nodes};
        if (res.nodes == 1) res.duals = lp->row_duals();
        const bool run_heuristic =
            cb.heuristic && (res.nodes == 1 || (opt.heuristic_frequency > 0 && res.nodes % opt.heuristic_frequency == 0) ||
                             !std::isfinite(incumbent));
        if (run_heuristic) {
          if (auto cand = cb.heuristic(view)) offer(*cand);
        }
        std::optional<BranchDecision> decision = cb.branch ? cb.branch(view) : std::nullopt;
        if (decision && (!tightens(*lp, decision->first) || !tightens(*lp, decision->second))) decision.reset();
        if (!decision) {
          std::optional<std::vector<double>> point = cb.polish ? cb.polish(view) : std::optional(cols);
          if (point) {
            offer(*point);
          } else if (cb.fallback) {
            decision = cb.fallback(view);
            if (decision && (!tightens(*lp, decision->first) || !tightens(*lp, decision->second))) decision.reset();
          }
        }
        if (decision && node_bound < prune_level()) {
          auto snapshot = std::make_shared<const Basis>(lp->basis());
          open.push(Node{node_bound, next_id++, cur.depth + 1, extend(cur.changes, decision->second), snapshot,
                         decision->tag, 1, z});
          Node child{node_bound, next_id++, cur.depth + 1, extend(cur.changes, decision->first), snapshot,
                     decision->tag, 0, z};
          for (const auto& c : decision->first) lp->set_bounds(c.var, c.lb, c.ub);
          applied = child.changes;
          cur = std::move(child);
          expanded = true;
        }
      }
    }
    if (!expanded) have_cur = false;
    res.lp_iterations = retired_iterations + lp->iterations();

    const double global = std::min(open_bound(true), incumbent);
    res.bound_trace.push_back(global);
    res.incumbent_trace.push_back(incumbent);
    if ((have_cur || !open.empty()) && (res.nodes >= opt.node_limit || elapsed() >= opt.time_limit)) {
      limit_hit = true;
      break;
    }
    if (have_cur && cur.bound >= prune_level()) have_cur = false;
  }

  res.wall_seconds = elapsed();
  res.objective = incumbent;
  if (limit_hit) {
    res.status = SolveStatus::limit;
    res.bound = std::min(open_bound(true), incumbent);
  } else {
    res.status = std::isfinite(incumbent) ? SolveStatus::optimal : SolveStatus::infeasible;
    res.bound = std::isfinite(incumbent) ? incumbent : kInf;
  }
  if (std::isfinite(incumbent)) res.gap = std::max(0.0, incumbent - res.bound) / std::max(1.0, std::abs(incumbent));
  return res;
}

}  // namespace ess
