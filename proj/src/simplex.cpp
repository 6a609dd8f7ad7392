#include "ess/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace ess {

namespace {
constexpr double kPivotTol = 1e-9;
constexpr double kDropTol = 1e-13;
constexpr long kResidualCheckInterval = 100;
}  // namespace

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
    case LpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

double MathModel::max_violation(const std::vector<double>& x) const {
  double worst = 0.0;
  for (int j = 0; j < cols(); ++j) {
    worst = std::max(worst, col_lb[j] - x[j]);
    worst = std::max(worst, x[j] - col_ub[j]);
  }
  for (int r = 0; r < row_count(); ++r) {
    const double a = rows[r].dot(x);
    worst = std::max(worst, row_lb[r] - a);
    worst = std::max(worst, a - row_ub[r]);
  }
  return worst;
}

DenseSimplex::DenseSimplex(const MathModel& model, SimplexOptions options) : model_(model), opt_(options) {
  n_ = model.cols();
  m_ = model.row_count();
  width_ = n_ + m_;
  lb_.resize(width_);
  ub_.resize(width_);
  cost_.assign(width_, 0.0);
  for (int j = 0; j < n_; ++j) {
    lb_[j] = model.col_lb[j];
    ub_[j] = model.col_ub[j];
    cost_[j] = model.cost[j];
  }
  for (int r = 0; r < m_; ++r) {
    lb_[n_ + r] = model.row_lb[r];
    ub_[n_ + r] = model.row_ub[r];
  }
  max_iterations_ = opt_.max_iterations > 0 ? opt_.max_iterations : 50L * width_ + 10000;
  x_.assign(width_, 0.0);
  state_.assign(width_, kAtLower);
  reset_to_slack_basis();
}

void DenseSimplex::reset_to_slack_basis() {
  tab_.assign(static_cast<std::size_t>(m_) * width_, 0.0);
  head_.assign(m_, 0);
  where_.assign(width_, -1);
  for (int r = 0; r < m_; ++r) {
    const auto& row = model_.rows[r];
    for (std::size_t k = 0; k < row.size(); ++k) tab(r, row.index[k]) -= row.value[k];
    tab(r, n_ + r) = 1.0;
    head_[r] = n_ + r;
    where_[n_ + r] = r;
    state_[n_ + r] = kBasic;
  }
  for (int j = 0; j < n_; ++j) {
    if (state_[j] == kBasic) state_[j] = kAtLower;
    place_nonbasic(j);
  }
  recompute_basic_values();
  recompute_reduced_costs();
  since_refactor_ = 0;
}

void DenseSimplex::place_nonbasic(int j) {
  const bool lo = std::isfinite(lb_[j]);
  const bool hi = std::isfinite(ub_[j]);
  std::int8_t s = state_[j];
  if (lo && hi && lb_[j] == ub_[j]) s = kAtLower;
  else if (s == kAtUpper && hi) s = kAtUpper;
  else if (s == kAtLower && lo) s = kAtLower;
  else if (lo) s = kAtLower;
  else if (hi) s = kAtUpper;
  else s = kFreeZero;
  state_[j] = s;
  x_[j] = s == kAtLower ? lb_[j] : s == kAtUpper ? ub_[j] : 0.0;
}

void DenseSimplex::recompute_basic_values() {
  std::vector<int> active;
  for (int j = 0; j < width_; ++j)
    if (where_[j] < 0 && x_[j] != 0.0) active.push_back(j);
  for (int r = 0; r < m_; ++r) {
    double v = 0.0;
    const double* row = &tab_[static_cast<std::size_t>(r) * width_];
    for (int j : active) v -= row[j] * x_[j];
    x_[head_[r]] = v;
  }
}

void DenseSimplex::recompute_reduced_costs() {
  d_ = cost_;
  for (int r = 0; r < m_; ++r) {
    const double cb = cost_[head_[r]];
    if (cb == 0.0) continue;
    const double* row = &tab_[static_cast<std::size_t>(r) * width_];
    for (int j = 0; j < width_; ++j) d_[j] -= cb * row[j];
  }
  for (int r = 0; r < m_; ++r) d_[head_[r]] = 0.0;
}

void DenseSimplex::pivot(int r, int j) {
  double* prow = &tab_[static_cast<std::size_t>(r) * width_];
  const double inv = 1.0 / prow[j];
  nz_.clear();
  for (int k = 0; k < width_; ++k) {
    if (prow[k] == 0.0) continue;
    prow[k] *= inv;
    if (std::abs(prow[k]) < kDropTol) {
      prow[k] = 0.0;
    } else {
      nz_.push_back(k);
    }
  }
  prow[j] = 1.0;
  for (int i = 0; i < m_; ++i) {
    if (i == r) continue;
    double* row = &tab_[static_cast<std::size_t>(i) * width_];
    const double f = row[j];
    if (f == 0.0) continue;
    for (int k : nz_) row[k] -= f * prow[k];
    row[j] = 0.0;
  }
  const double fd = d_[j];
  if (fd != 0.0) {
    for (int k : nz_) d_[k] -= fd * prow[k];
  }
  d_[j] = 0.0;
  const int leaving = head_[r];
  where_[leaving] = -1;
  head_[r] = j;
  where_[j] = r;
  state_[j] = kBasic;
}

void DenseSimplex::refactor() {
  const std::vector<int> desired = head_;
  std::vector<char> want(width_, 0);
  for (int v : desired) want[v] = 1;
  std::vector<std::int8_t> saved = state_;

  tab_.assign(static_cast<std::size_t>(m_) * width_, 0.0);
  std::fill(where_.begin(), where_.end(), -1);
  for (int r = 0; r < m_; ++r) {
    const auto& row = model_.rows[r];
    for (std::size_t k = 0; k < row.size(); ++k) tab(r, row.index[k]) -= row.value[k];
    tab(r, n_ + r) = 1.0;
    head_[r] = n_ + r;
    where_[n_ + r] = r;
  }
  d_.assign(width_, 0.0);

  for (int v : desired) {
    if (v >= n_) continue;
    int best = -1;
    double best_abs = 1e-9;
    for (int r = 0; r < m_; ++r) {
      if (want[head_[r]]) continue;
      const double a = std::abs(tab(r, v));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (best >= 0) pivot(best, v);
  }
  for (int j = 0; j < width_; ++j) {
    if (where_[j] >= 0) continue;
    state_[j] = saved[j] == kBasic ? static_cast<int>(kAtLower) : static_cast<int>(saved[j]);
    place_nonbasic(j);
  }
  recompute_basic_values();
  recompute_reduced_costs();
  since_refactor_ = 0;
}

double DenseSimplex::residual() const {
  double worst = 0.0;
  for (int r = 0; r < m_; ++r) {
    const auto& row = model_.rows[r];
    double a = 0.0, scale = 1.0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double t = row.value[k] * x_[row.index[k]];
      a += t;
      scale = std::max(scale, std::abs(t));
    }
    worst = std::max(worst, std::abs(a - x_[n_ + r]) / scale);
  }
  return worst;
}

double DenseSimplex::infeasibility(int r) const {
  const int b = head_[r];
  const double v = x_[b];
  if (v < lb_[b] - opt_.feasibility_tol) return lb_[b] - v;
  if (v > ub_[b] + opt_.feasibility_tol) return v - ub_[b];
  return 0.0;
}

bool DenseSimplex::dual_feasible() const {
  const double tol = opt_.optimality_tol;
  for (int j = 0; j < width_; ++j) {
    if (where_[j] >= 0 || lb_[j] == ub_[j]) continue;
    switch (state_[j]) {
      case kAtLower:
        if (d_[j] < -tol) return false;
        break;
      case kAtUpper:
        if (d_[j] > tol) return false;
        break;
      case kFreeZero:
        if (std::abs(d_[j]) > tol) return false;
        break;
      default: break;
    }
  }
  return true;
}

LpStatus DenseSimplex::primal_simplex(bool phase_one) {
  const double ftol = opt_.feasibility_tol;
  const double dtol = opt_.optimality_tol;
  std::vector<double> c1(m_), dj(width_);
  int streak = 0;
  for (;;) {
    if (iterations_ >= budget_end_) return LpStatus::iteration_limit;
    if (since_refactor_ > 0 && since_refactor_ % kResidualCheckInterval == 0 && residual() > 1e-9) refactor();

    const double* dvec = d_.data();
    if (phase_one) {
      bool any = false;
      for (int r = 0; r < m_; ++r) {
        const int b = head_[r];
        c1[r] = x_[b] < lb_[b] - ftol ? -1.0 : x_[b] > ub_[b] + ftol ? 1.0 : 0.0;
        any = any || c1[r] != 0.0;
      }
      if (!any) return LpStatus::optimal;
      std::fill(dj.begin(), dj.end(), 0.0);
      for (int r = 0; r < m_; ++r) {
        if (c1[r] == 0.0) continue;
        const double* row = &tab_[static_cast<std::size_t>(r) * width_];
        for (int j = 0; j < width_; ++j) dj[j] -= c1[r] * row[j];
      }
      dvec = dj.data();
    }

    const bool bland = opt_.anti_cycling && streak >= opt_.degeneracy_streak;
    int enter = -1;
    double best = 0.0;
    for (int j = 0; j < width_; ++j) {
      if (where_[j] >= 0 || lb_[j] == ub_[j]) continue;
      const double dv = dvec[j];
      const std::int8_t s = state_[j];
      double score = 0.0;
      if ((s == kAtLower || s == kFreeZero) && dv < -dtol) score = -dv;
      else if ((s == kAtUpper || s == kFreeZero) && dv > dtol) score = dv;
      if (score <= 0.0) continue;
      if (bland) {
        enter = j;
        break;
      }
      if (score > best) {
        best = score;
        enter = j;
      }
    }
    if (enter < 0) {
      if (phase_one) return LpStatus::infeasible;
      return LpStatus::optimal;
    }
    const double sigma = dvec[enter] < 0.0 ? 1.0 : -1.0;

    // Ratio test: Harris two-pass in normal mode, textbook lowest-index in Bland mode.
    auto limit_of = [&](int i, double a, double slack) -> double {
      const int b = head_[i];
      const double v = x_[b];
      if (a > 0.0) {
        if (phase_one && v < lb_[b] - ftol) return kInf;
        if (phase_one && v > ub_[b] + ftol) return (v - ub_[b]) / a;
        return std::isfinite(lb_[b]) ? (v - lb_[b] + slack) / a : kInf;
      }
      if (phase_one && v > ub_[b] + ftol) return kInf;
      if (phase_one && v < lb_[b] - ftol) return (lb_[b] - v) / -a;
      return std::isfinite(ub_[b]) ? (ub_[b] - v + slack) / -a : kInf;
    };
    double theta_max = kInf;
    for (int i = 0; i < m_; ++i) {
      const double a = sigma * tab(i, enter);
      if (std::abs(a) < kPivotTol) continue;
      theta_max = std::min(theta_max, limit_of(i, a, bland ? 0.0 : ftol));
    }
    int leave = -1;
    double theta = kInf;
    if (std::isfinite(theta_max)) {
      double best_a = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double a = sigma * tab(i, enter);
        if (std::abs(a) < kPivotTol) continue;
        const double ratio = limit_of(i, a, 0.0);
        if (ratio > theta_max) continue;
        if (bland) {
          if (ratio < theta - 1e-15 || (ratio <= theta + 1e-15 && (leave < 0 || head_[i] < head_[leave]))) {
            theta = ratio;
            leave = i;
          }
        } else if (std::abs(a) > best_a) {
          best_a = std::abs(a);
          leave = i;
          theta = ratio;
        }
      }
      theta = std::max(theta, 0.0);
    }
    const double span = ub_[enter] - lb_[enter];
    const bool flip = std::isfinite(span) && state_[enter] != kFreeZero && span <= theta;
    if (!flip && leave < 0) {
      if (phase_one) return LpStatus::numerical_failure;
      return LpStatus::unbounded;
    }
    const double step = flip ? span : theta;
    streak = step <= 1e-12 ? streak + 1 : 0;

    x_[enter] += sigma * step;
    if (step != 0.0) {
      for (int i = 0; i < m_; ++i) {
        const double a = tab(i, enter);
        if (a != 0.0) x_[head_[i]] -= sigma * step * a;
      }
    }
    ++iterations_;
    ++since_refactor_;
    if (flip) {
      state_[enter] = sigma > 0.0 ? kAtUpper : kAtLower;
      x_[enter] = sigma > 0.0 ? ub_[enter] : lb_[enter];
      continue;
    }
    const int b = head_[leave];
    const double dl = std::isfinite(lb_[b]) ? std::abs(x_[b] - lb_[b]) : kInf;
    const double du = std::isfinite(ub_[b]) ? std::abs(x_[b] - ub_[b]) : kInf;
    state_[b] = dl <= du ? kAtLower : kAtUpper;
    pivot(leave, enter);
    place_nonbasic(b);
  }
}

LpStatus DenseSimplex::dual_simplex() {
  const double dtol = opt_.optimality_tol;
  for (;;) {
    if (iterations_ >= budget_end_) return LpStatus::iteration_limit;
    if (since_refactor_ > 0 && since_refactor_ % kResidualCheckInterval == 0 && residual() > 1e-9) {
      refactor();
      if (!dual_feasible()) return LpStatus::numerical_failure;
    }
    int r = -1;
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double v = infeasibility(i);
      if (v > worst) {
        worst = v;
        r = i;
      }
    }
    if (r < 0) return LpStatus::optimal;
    const int b = head_[r];
    const bool raise = x_[b] < lb_[b];
    const double target = raise ? lb_[b] : ub_[b];
    const double dir = raise ? 1.0 : -1.0;
    const double* row = &tab_[static_cast<std::size_t>(r) * width_];

    auto eligible = [&](int j, double a) {
      if (where_[j] >= 0 || lb_[j] == ub_[j] || std::abs(a) < kPivotTol) return false;
      switch (state_[j]) {
        case kAtLower: return a * dir < 0.0;
        case kAtUpper: return a * dir > 0.0;
        case kFreeZero: return true;
        default: return false;
      }
    };
    double theta_max = kInf;
    for (int j = 0; j < width_; ++j) {
      const double a = row[j];
      if (!eligible(j, a)) continue;
      theta_max = std::min(theta_max, (std::abs(d_[j]) + dtol) / std::abs(a));
    }
    int enter = -1;
    double best_a = 0.0;
    for (int j = 0; j < width_; ++j) {
      const double a = row[j];
      if (!eligible(j, a)) continue;
      if (std::abs(d_[j]) / std::abs(a) > theta_max) continue;
      if (std::abs(a) > best_a) {
        best_a = std::abs(a);
        enter = j;
      }
    }
    if (enter < 0) {
      farkas_row_ = r;
      return LpStatus::infeasible;
    }

    const double a = row[enter];
    const double delta = (target - x_[b]) / -a;
    x_[enter] += delta;
    for (int i = 0; i < m_; ++i) {
      const double t = tab(i, enter);
      if (t != 0.0) x_[head_[i]] -= t * delta;
    }
    x_[b] = target;
    state_[b] = raise ? kAtLower : kAtUpper;
    pivot(r, enter);
    ++iterations_;
    ++since_refactor_;
  }
}

LpStatus DenseSimplex::run() {
  for (int attempt = 0; attempt < 3; ++attempt) {
    LpStatus s = primal_simplex(true);
    if (s == LpStatus::infeasible) {
      refactor();
      s = primal_simplex(true);
      if (s == LpStatus::infeasible) return status_ = s;
    }
    if (s != LpStatus::optimal) return status_ = s;
    s = primal_simplex(false);
    if (s != LpStatus::optimal) return status_ = s;
    if (residual() <= 1e-9) return status_ = LpStatus::optimal;
    refactor();
    bool feasible = true;
    for (int r = 0; r < m_ && feasible; ++r) feasible = infeasibility(r) == 0.0;
    if (feasible && dual_feasible()) return status_ = LpStatus::optimal;
  }
  return status_ = LpStatus::numerical_failure;
}

LpStatus DenseSimplex::solve() {
  budget_end_ = iterations_ + max_iterations_;
  return run();
}

// Row r of the tableau encodes y^T (A x - s) = 0 with y read off the logical
// columns. Rebuilding the combination from the original rows and bounding it
// over the variable box proves infeasibility independently of tableau drift.
bool DenseSimplex::certifies_infeasibility(int r) const {
  if (r < 0 || r >= m_) return false;
  std::vector<double> rho(width_, 0.0);
  for (int i = 0; i < m_; ++i) {
    const double y = -tab(r, n_ + i);
    if (y == 0.0) continue;
    rho[n_ + i] = -y;
    const auto& row = model_.rows[i];
    for (std::size_t k = 0; k < row.size(); ++k) rho[row.index[k]] += y * row.value[k];
  }
  double lo = 0.0, hi = 0.0, scale = 0.0;
  for (int j = 0; j < width_; ++j) {
    const double a = rho[j];
    if (std::abs(a) < 1e-12) continue;
    scale = std::max(scale, std::abs(a));
    lo += a > 0.0 ? a * lb_[j] : a * ub_[j];
    hi += a > 0.0 ? a * ub_[j] : a * lb_[j];
  }
  if (!std::isfinite(lo) && !std::isfinite(hi)) return false;
  const double margin = 10.0 * opt_.feasibility_tol * std::max(1.0, scale);
  return lo > margin || hi < -margin;
}

LpStatus DenseSimplex::resolve() {
  budget_end_ = iterations_ + max_iterations_;
  if (dual_feasible()) {
    const LpStatus s = dual_simplex();
    if (s == LpStatus::infeasible) {
      if (certifies_infeasibility(farkas_row_)) return status_ = LpStatus::infeasible;
      return run();
    }
    if (s == LpStatus::optimal) {
      const LpStatus t = primal_simplex(false);
      if (t == LpStatus::optimal && residual() <= 1e-9) return status_ = LpStatus::optimal;
    }
  }
  return run();
}

void DenseSimplex::set_bounds(int var, double lb, double ub) {
  lb_[var] = lb;
  ub_[var] = ub;
  if (where_[var] >= 0) return;
  const double old = x_[var];
  if (state_[var] == kFreeZero && std::isfinite(lb) != std::isfinite(ub)) {
    state_[var] = std::isfinite(lb) ? kAtLower : kAtUpper;
  } else if (state_[var] == kFreeZero && std::isfinite(lb)) {
    state_[var] = d_[var] >= 0.0 ? kAtLower : kAtUpper;
  }
  place_nonbasic(var);
  const double delta = x_[var] - old;
  if (delta == 0.0) return;
  for (int i = 0; i < m_; ++i) {
    const double t = tab(i, var);
    if (t != 0.0) x_[head_[i]] -= t * delta;
  }
}

Basis DenseSimplex::basis() const {
  Basis b;
  b.head = head_;
  b.status = state_;
  return b;
}

void DenseSimplex::load_basis(const Basis& basis) {
  head_ = basis.head;
  state_ = basis.status;
  refactor();
}

double DenseSimplex::objective() const {
  double s = model_.offset;
  for (int j = 0; j < n_; ++j) s += cost_[j] * x_[j];
  return s;
}

std::vector<double> DenseSimplex::primal() const { return {x_.begin(), x_.begin() + n_}; }

std::vector<double> DenseSimplex::row_activity() const { return {x_.begin() + n_, x_.end()}; }

std::vector<double> DenseSimplex::row_duals() const { return {d_.begin() + n_, d_.end()}; }

std::vector<double> DenseSimplex::reduced_costs() const { return {d_.begin(), d_.begin() + n_}; }

}  // namespace ess
