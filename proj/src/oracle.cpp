#include "ess/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

namespace ess {

namespace {

constexpr double kPinSlack = 1e-9;

double pin_level(double optimum) { return optimum + kPinSlack * (1.0 + std::abs(optimum)); }

LpSolution solve_or_throw(const LinearProgram& lp, const SolveOptions& options) {
  LpSolution sol = solve_lp(lp, options);
  if (sol.status != LpSolveStatus::optimal) throw Error(ErrorCode::solver, "lower-level LP did not solve to optimality");
  return sol;
}

void check_division(const Instance& in, const Division& d) {
  if (static_cast<int>(d.s_customer.size()) != in.customers()) {
    throw Error(ErrorCode::dimension_mismatch, "division has wrong number of customer entries");
  }
  if (!(d.s_disco >= 0.0) || std::any_of(d.s_customer.begin(), d.s_customer.end(), [](double s) { return !(s >= 0.0); })) {
    throw Error(ErrorCode::invalid_argument, "division entries must be nonnegative");
  }
  if (d.total() > in.storage.total_capacity + 1e-9) {
    throw Error(ErrorCode::invalid_argument, "division exceeds total capacity");
  }
}

ScheduleSet schedules_from(const Instance& in, const std::vector<std::vector<double>>& xs) {
  const int T = in.slots();
  const int N = in.customers();
  const LlmLayout at{T};
  ScheduleSet s;
  s.customer_ch.assign(N, Series(T));
  s.customer_dis.assign(N, Series(T));
  s.customer_peak.assign(N, 0.0);
  s.customer_valley.assign(N, 0.0);
  s.disco_ch.assign(T, 0.0);
  s.disco_dis.assign(T, 0.0);
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < T; ++t) {
      s.customer_ch[n][t] = xs[n][at.charge(t)];
      s.customer_dis[n][t] = xs[n][at.discharge(t)];
    }
    s.customer_peak[n] = xs[n][at.peak()];
    s.customer_valley[n] = xs[n][at.valley()];
  }
  for (int t = 0; t < T; ++t) {
    s.disco_ch[t] = xs[N][at.charge(t)];
    s.disco_dis[t] = xs[N][at.discharge(t)];
  }
  snap_powers(s);
  s.system_peak = system_peak(net_system_load(in, s));
  return s;
}

// Joint tie-breaking LP over every lower level's optimal face.
std::optional<std::vector<std::vector<double>>> joint_resolve(const Instance& in,
                                                              const std::vector<LinearProgram>& lps,
                                                              const std::vector<double>& optimum,
                                                              const SolveOptions& options) {
  const int T = in.slots();
  const LlmLayout at{T};
  MathModel m;
  std::vector<int> begin;
  for (const auto& lp : lps) {
    begin.push_back(m.cols());
    for (const auto& v : lp.vars) m.add_col(v.name, v.lower, v.upper);
  }
  const int peak = m.add_col("peak", -kInf, kInf, in.weights.lambda1);
  for (std::size_t b = 0; b < lps.size(); ++b) {
    const auto& lp = lps[b];
    auto shifted = [&](const SparseRow& src) {
      SparseRow row;
      for (std::size_t k = 0; k < src.size(); ++k) row.add(begin[b] + src.index[k], src.value[k]);
      return row;
    };
    for (int i = 0; i < lp.g_count(); ++i) m.add_row("g", shifted(lp.g_rows[i]), lp.g_rhs[i], kInf);
    for (int i = 0; i < lp.h_count(); ++i) m.add_row("h", shifted(lp.h_rows[i]), lp.h_rhs[i], lp.h_rhs[i]);
    SparseRow pin;
    for (int j = 0; j < lp.var_count(); ++j) pin.add(begin[b] + j, lp.cost[j]);
    m.add_row("pin", std::move(pin), -kInf, pin_level(optimum[b]));
  }
  for (int t = 0; t < T; ++t) {
    const double price = (in.weights.lambda2 * in.prices.lmp[t] + in.weights.lambda3 * in.prices.tou[t]) * in.dt();
    m.offset += price * in.loads.system_load[t];
    SparseRow row;
    row.add(peak, 1.0);
    for (std::size_t b = 0; b < lps.size(); ++b) {
      m.cost[begin[b] + at.charge(t)] += price;
      m.cost[begin[b] + at.discharge(t)] -= price;
      row.add(begin[b] + at.charge(t), -1.0);
      row.add(begin[b] + at.discharge(t), 1.0);
    }
    m.add_row("peak", std::move(row), in.loads.system_load[t], kInf);
  }
  DenseSimplex simplex(m, options.simplex());
  if (simplex.solve() != LpStatus::optimal) return std::nullopt;
  const std::vector<double> x = simplex.primal();
  std::vector<std::vector<double>> out;
  for (std::size_t b = 0; b < lps.size(); ++b) {
    out.emplace_back(x.begin() + begin[b], x.begin() + begin[b] + lps[b].var_count());
  }
  return out;
}

double lower_value(const LinearProgram& lp, const std::vector<double>& x) {
  double s = 0.0;
  for (int j = 0; j < lp.var_count(); ++j) s += lp.cost[j] * x[j];
  return s;
}

struct CachedLower {
  LinearProgram lp;
  LpSolution sol;
};

DivisionEvaluation evaluate_with(const Instance& in, const Division& division,
                                 const std::function<const CachedLower&(int, double)>& lower,
                                 const SolveOptions& options) {
  const int N = in.customers();
  std::vector<LinearProgram> lps;
  std::vector<double> optimum;
  std::vector<std::vector<double>> raw;
  for (int b = 0; b <= N; ++b) {
    const CachedLower& c = lower(b, b < N ? division.s_customer[b] : division.s_disco);
    lps.push_back(c.lp);
    optimum.push_back(c.sol.objective);
    raw.push_back(c.sol.x);
  }
  DivisionEvaluation ev;
  ev.division = division;
  const ScheduleSet unresolved = schedules_from(in, raw);
  ev.unresolved_upper_objective = upper_objective(in, unresolved);

  auto joint = joint_resolve(in, lps, optimum, options);
  std::vector<std::vector<double>> xs = raw;
  if (joint) {
    bool ok = true;
    for (std::size_t b = 0; b < lps.size() && ok; ++b) {
      const LpEvaluation e = evaluate(lps[b], (*joint)[b]);
      ok = e.objective <= pin_level(optimum[b]) + 1e-9 && e.min_g >= -1e-6 && e.max_h <= 1e-6;
    }
    if (ok) xs = *joint;
  }
  ev.schedules = schedules_from(in, xs);
  ev.upper_objective = upper_objective(in, ev.schedules);
  // The joint LP optimizes over a superset containing the raw point.
  if (ev.upper_objective > ev.unresolved_upper_objective) {
    ev.schedules = unresolved;
    ev.upper_objective = ev.unresolved_upper_objective;
    xs = raw;
  }
  for (std::size_t b = 0; b < lps.size(); ++b) ev.lower_objectives.push_back(lower_value(lps[b], xs[b]));
  return ev;
}

long binomial_capped(long n, long k, long cap) {
  // C(n, k), saturating at cap + 1.
  long double r = 1.0L;
  for (long i = 1; i <= k; ++i) {
    r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (r > static_cast<long double>(cap) + 1.0L) return cap + 1;
  }
  return static_cast<long>(std::llround(r));
}

long grid_steps(const Instance& in, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorCode::invalid_argument, "grid step must be positive");
  return static_cast<long>(std::floor(in.storage.total_capacity / step + 1e-9));
}

}  // namespace

std::vector<double> optimistic_resolve(const LinearProgram& lp, const std::vector<double>& upper_gradient,
                                       const SolveOptions& options) {
  if (static_cast<int>(upper_gradient.size()) != lp.var_count()) {
    throw Error(ErrorCode::dimension_mismatch, "optimistic_resolve: gradient has wrong dimension");
  }
  const LpSolution first = solve_lp(lp, options);
  if (first.status != LpSolveStatus::optimal) throw Error(ErrorCode::solver, "optimistic_resolve: LP not optimal");
  MathModel m = lp.to_model();
  m.cost = upper_gradient;
  SparseRow pin;
  for (int j = 0; j < lp.var_count(); ++j) pin.add(j, lp.cost[j]);
  m.add_row("pin", std::move(pin), -kInf, pin_level(first.objective));
  DenseSimplex simplex(m, options.simplex());
  const LpStatus st = simplex.solve();
  if (st != LpStatus::optimal) {
    throw Error(ErrorCode::solver, std::string("optimistic_resolve: tie-breaking LP ") + to_string(st));
  }
  std::vector<double> x = simplex.primal();
  const LpEvaluation e = evaluate(lp, x);
  if (e.objective > pin_level(first.objective) + 1e-9 || e.min_g < -1e-6 || e.max_h > 1e-6) {
    std::ostringstream msg;
    msg << "optimistic_resolve: pinned objective " << e.objective << " exceeds optimum " << first.objective;
    throw Error(ErrorCode::verification, msg.str());
  }
  // Never return a point worse for the upper level than the plain optimum.
  double g_new = 0.0, g_old = 0.0;
  for (int j = 0; j < lp.var_count(); ++j) {
    g_new += upper_gradient[j] * x[j];
    g_old += upper_gradient[j] * first.x[j];
  }
  return g_new <= g_old ? x : first.x;
}

DivisionEvaluation evaluate_division(const Instance& in, const Division& division, const SolveOptions& options) {
  check_division(in, division);
  std::vector<CachedLower> slots(in.customers() + 1);
  auto lower = [&](int b, double cap) -> const CachedLower& {
    CachedLower& c = slots[b];
    c.lp = b < in.customers() ? build_llm_c(in, b, cap) : build_llm_d(in, cap);
    c.sol = solve_or_throw(c.lp, options);
    return c;
  };
  return evaluate_with(in, division, lower, options);
}

long grid_point_count(const Instance& in, double step) {
  const long k = grid_steps(in, step);
  const long parts = in.customers() + 1;
  // Nonnegative integer (N+1)-tuples with sum <= k.
  return binomial_capped(k + parts, parts, std::numeric_limits<long>::max() / 4);
}

OracleReport grid_oracle(const Instance& in, double step, const OracleOptions& options) {
  const long k_max = grid_steps(in, step);
  const int N = in.customers();
  const long count = binomial_capped(k_max + N + 1, N + 1, options.max_points);
  if (count > options.max_points) {
    std::ostringstream msg;
    msg << "grid_oracle: " << count << "+ grid points exceed the guard of " << options.max_points;
    throw Error(ErrorCode::limit, msg.str());
  }
  const double total = in.storage.total_capacity;
  auto value = [&](long k) { return std::min(total, static_cast<double>(k) * step); };

  // Each lower level depends only on its own capacity: solve once per grid value.
  std::vector<std::vector<std::optional<CachedLower>>> cache(N + 1, std::vector<std::optional<CachedLower>>(k_max + 1));
  std::vector<long> current(N + 1, 0);
  auto lower = [&](int b, double) -> const CachedLower& {
    auto& slot = cache[b][current[b]];
    if (!slot) {
      CachedLower c;
      const double cap = value(current[b]);
      c.lp = b < N ? build_llm_c(in, b, cap) : build_llm_d(in, cap);
      c.sol = solve_or_throw(c.lp, options.solve);
      slot = std::move(c);
    }
    return *slot;
  };

  OracleReport report;
  report.step = step;
  long moved = 0;
  // Enumeration order: s_disco, then customers, each ascending (lexicographic).
  std::vector<long> ks(N + 1, 0);
  std::function<void(int, long)> visit = [&](int pos, long remaining) {
    if (pos == N + 1) {
      Division d;
      d.s_disco = value(ks[0]);
      for (int n = 0; n < N; ++n) d.s_customer.push_back(value(ks[n + 1]));
      current[N] = ks[0];
      for (int n = 0; n < N; ++n) current[n] = ks[n + 1];
      DivisionEvaluation ev = evaluate_with(in, d, lower, options.solve);
      const double scale = 1.0 + std::abs(ev.unresolved_upper_objective);
      if (ev.upper_objective < ev.unresolved_upper_objective - 1e-9 * scale) ++moved;
      if (ev.upper_objective < report.best_upper_objective) {
        report.best_upper_objective = ev.upper_objective;
        report.best_division = d;
        report.best_schedules = ev.schedules;
        if (ev.upper_objective < ev.unresolved_upper_objective - 1e-9 * scale) {
          std::ostringstream msg;
          msg.precision(12);
          msg << "tie-breaking at the incumbent lowered the upper objective from " << ev.unresolved_upper_objective
              << " to " << ev.upper_objective;
          report.notes.assign(1, msg.str());
        } else {
          report.notes.clear();
        }
      }
      report.records.push_back({d, ev.lower_objectives, ev.upper_objective});
      return;
    }
    for (long k = 0; k <= remaining; ++k) {
      ks[pos] = k;
      visit(pos + 1, remaining - k);
    }
  };
  visit(0, k_max);
  if (moved > 0) report.notes.push_back(std::to_string(moved) + " grid points had lower-level ties resolved optimistically");
  return report;
}

KktReport check_kkt_residuals(const KktSystem& kkt, const std::vector<double>& x, const std::vector<double>& omega,
                              const std::vector<double>& v, double tol) {
  const LinearProgram& p = kkt.primal;
  if (static_cast<int>(x.size()) != p.var_count() || static_cast<int>(omega.size()) != p.g_count() ||
      static_cast<int>(v.size()) != p.h_count()) {
    throw Error(ErrorCode::dimension_mismatch, "check_kkt_residuals: vector sizes do not match the system");
  }
  KktReport r;
  std::vector<double> duals = omega;
  duals.insert(duals.end(), v.begin(), v.end());
  for (int j = 0; j < p.var_count(); ++j) {
    r.stationarity = std::max(r.stationarity, std::abs(kkt.stationarity[j].dot(duals) - kkt.stationarity_rhs[j]));
  }
  r.min_dual = omega.empty() ? 0.0 : *std::min_element(omega.begin(), omega.end());
  for (int i = 0; i < p.g_count(); ++i) {
    const double g = p.g_rows[i].dot(x) - p.g_rhs[i];
    r.primal_violation = std::max(r.primal_violation, -g);
    r.complementarity = std::max(r.complementarity, std::abs(omega[i] * g));
  }
  for (int i = 0; i < p.h_count(); ++i) {
    r.primal_violation = std::max(r.primal_violation, std::abs(p.h_rows[i].dot(x) - p.h_rhs[i]));
  }
  r.pass = r.stationarity <= tol && r.min_dual >= -tol && r.complementarity <= tol && r.primal_violation <= tol;
  return r;
}

bool InvariantReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const InvariantCheck& c) { return c.pass; });
}

const InvariantCheck* InvariantReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

InvariantReport check_schedule_invariants(const Instance& in, const Division& division, const ScheduleSet& s,
                                          double tol) {
  const int T = in.slots();
  const int N = in.customers();
  const auto& st = in.storage;
  if (static_cast<int>(division.s_customer.size()) != N || static_cast<int>(s.customer_ch.size()) != N ||
      static_cast<int>(s.customer_dis.size()) != N || static_cast<int>(s.disco_ch.size()) != T ||
      static_cast<int>(s.disco_dis.size()) != T || static_cast<int>(s.customer_peak.size()) != N ||
      static_cast<int>(s.customer_valley.size()) != N) {
    throw Error(ErrorCode::dimension_mismatch, "check_schedule_invariants: inconsistent dimensions");
  }
  InvariantCheck split{"capacity_split"}, sign{"nonnegative_power"}, cap{"power_cap"}, soc{"soc_corridor"},
      balance{"energy_balance"}, shape{"peak_valley"}, peak{"system_peak"};

  double neg_div = std::max(0.0, -division.s_disco);
  for (double c : division.s_customer) neg_div = std::max(neg_div, -c);
  split.worst = std::max(neg_div, division.total() - st.total_capacity);

  auto owner = [&](const Series& ch, const Series& dis, double capacity, double soc_ini) {
    for (int t = 0; t < T; ++t) {
      sign.worst = std::max({sign.worst, -ch[t], -dis[t]});
      cap.worst = std::max({cap.worst, ch[t] - st.power_ratio * capacity, dis[t] - st.power_ratio * capacity});
    }
    const Series e = soc_trajectory(st, capacity, ch, dis, soc_ini, in.dt());
    for (double v : e) soc.worst = std::max({soc.worst, capacity * st.soc_lower - v, v - capacity * st.soc_upper});
    balance.worst = std::max(balance.worst, std::abs(e.back() - capacity * soc_ini));
  };
  for (int n = 0; n < N; ++n) {
    owner(s.customer_ch[n], s.customer_dis[n], division.s_customer[n], st.soc_ini_customer[n]);
    for (int t = 0; t < T; ++t) {
      const double own = in.loads.customer_load[n][t] + s.customer_ch[n][t] - s.customer_dis[n][t];
      shape.worst = std::max({shape.worst, own - s.customer_peak[n], s.customer_valley[n] - own});
    }
  }
  owner(s.disco_ch, s.disco_dis, division.s_disco, st.soc_ini_disco);
  const Series net = net_system_load(in, s);
  for (double v : net) peak.worst = std::max(peak.worst, v - s.system_peak);

  InvariantReport r;
  for (InvariantCheck* c : {&split, &sign, &cap, &soc, &balance, &shape, &peak}) {
    c->worst = std::max(0.0, c->worst);
    c->pass = c->worst <= tol;
    r.checks.push_back(*c);
  }
  return r;
}

}  // namespace ess
