#include "ess/linear_program.hpp"

#include <cmath>
#include <string>

namespace ess {

namespace {

struct RowSink {
  LinearProgram& lp;
  void g(SparseRow row, double rhs, int family, int slot) {
    lp.g_rows.push_back(std::move(row));
    lp.g_rhs.push_back(rhs);
    lp.g_family.push_back(family);
    lp.g_slot.push_back(slot);
  }
  void g_param(SparseRow row, double cap_coef, int family, int slot) {
    lp.markers.push_back({false, lp.g_count(), cap_coef});
    g(std::move(row), cap_coef * lp.capacity, family, slot);
  }
};

// Families 1-6 and the energy balance shared by both lower-level models.
void add_storage_rows(LinearProgram& lp, const Instance& in, double soc_ini) {
  const int T = in.slots();
  const LlmLayout at{T};
  const auto& st = in.storage;
  const double dt = in.dt();
  RowSink sink{lp};

  for (int t = 0; t < T; ++t) {
    SparseRow row;
    for (int tau = 0; tau <= t; ++tau) {
      row.add(at.charge(tau), dt * st.eta_ch);
      row.add(at.discharge(tau), -dt / st.eta_dis);
    }
    sink.g_param(std::move(row), st.soc_lower - soc_ini, 1, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    for (int tau = 0; tau <= t; ++tau) {
      row.add(at.charge(tau), -dt * st.eta_ch);
      row.add(at.discharge(tau), dt / st.eta_dis);
    }
    sink.g_param(std::move(row), soc_ini - st.soc_upper, 2, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.discharge(t), 1.0);
    sink.g(std::move(row), 0.0, 3, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.charge(t), 1.0);
    sink.g(std::move(row), 0.0, 4, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.discharge(t), -1.0);
    sink.g_param(std::move(row), -st.power_ratio, 5, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.charge(t), -1.0);
    sink.g_param(std::move(row), -st.power_ratio, 6, t);
  }

  SparseRow balance;
  for (int t = 0; t < T; ++t) {
    balance.add(at.charge(t), dt * st.eta_ch);
    balance.add(at.discharge(t), -dt / st.eta_dis);
  }
  lp.h_rows.push_back(std::move(balance));
  lp.h_rhs.push_back(0.0);
}

void add_power_vars(LinearProgram& lp, const Instance& in, const Series& price, const std::string& tag) {
  const int T = in.slots();
  lp.vars.resize(2 * T);
  lp.cost.resize(2 * T);
  for (int t = 0; t < T; ++t) {
    lp.vars[t] = {tag + "_ch_" + std::to_string(t), -kInf, kInf, VarRole::charge, t};
    lp.vars[T + t] = {tag + "_dis_" + std::to_string(t), -kInf, kInf, VarRole::discharge, t};
    lp.cost[t] = price[t] * in.dt();
    lp.cost[T + t] = -price[t] * in.dt();
  }
}

void check_capacity(double capacity) {
  if (!(capacity >= 0.0) || !std::isfinite(capacity)) {
    throw Error(ErrorCode::invalid_argument, "capacity must be a nonnegative finite value");
  }
}

}  // namespace

LinearProgram build_llm_c(const Instance& in, int n, double capacity) {
  check_capacity(capacity);
  if (n < 0 || n >= in.customers()) throw Error(ErrorCode::invalid_argument, "customer index out of range");
  const int T = in.slots();
  const LlmLayout at{T};
  LinearProgram lp;
  lp.capacity = capacity;
  const std::string tag = "c" + std::to_string(n);
  add_power_vars(lp, in, in.prices.tou, tag);
  lp.vars.push_back({tag + "_peak", -kInf, kInf, VarRole::peak, -1});
  lp.vars.push_back({tag + "_valley", -kInf, kInf, VarRole::valley, -1});
  lp.cost.push_back(in.weights.alpha);
  lp.cost.push_back(-in.weights.alpha);

  add_storage_rows(lp, in, in.storage.soc_ini_customer.at(n));
  RowSink sink{lp};
  const Series& load = in.loads.customer_load[n];
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.charge(t), -1.0);
    row.add(at.discharge(t), 1.0);
    row.add(at.peak(), 1.0);
    sink.g(std::move(row), load[t], 7, t);
  }
  for (int t = 0; t < T; ++t) {
    SparseRow row;
    row.add(at.charge(t), 1.0);
    row.add(at.discharge(t), -1.0);
    row.add(at.valley(), -1.0);
    sink.g(std::move(row), -load[t], 8, t);
  }
  return lp;
}

LinearProgram build_llm_d(const Instance& in, double capacity) {
  check_capacity(capacity);
  LinearProgram lp;
  lp.capacity = capacity;
  add_power_vars(lp, in, in.prices.lmp, "d");
  add_storage_rows(lp, in, in.storage.soc_ini_disco);
  return lp;
}

std::vector<double> LinearProgram::g_rhs_fixed() const {
  std::vector<double> b = g_rhs;
  for (const auto& mk : markers)
    if (!mk.equality) b[mk.row] -= mk.coefficient * capacity;
  return b;
}

std::vector<double> LinearProgram::h_rhs_fixed() const {
  std::vector<double> b = h_rhs;
  for (const auto& mk : markers)
    if (mk.equality) b[mk.row] -= mk.coefficient * capacity;
  return b;
}

LinearProgram LinearProgram::at_capacity(double new_capacity) const {
  check_capacity(new_capacity);
  LinearProgram lp = *this;
  lp.g_rhs = g_rhs_fixed();
  lp.h_rhs = h_rhs_fixed();
  lp.capacity = new_capacity;
  for (const auto& mk : markers) {
    auto& b = mk.equality ? lp.h_rhs : lp.g_rhs;
    b[mk.row] += mk.coefficient * new_capacity;
  }
  return lp;
}

MathModel LinearProgram::to_model() const {
  MathModel m;
  for (int j = 0; j < var_count(); ++j) m.add_col(vars[j].name, vars[j].lower, vars[j].upper, cost[j]);
  for (int i = 0; i < g_count(); ++i)
    m.add_row("g" + std::to_string(g_family[i]) + "_" + std::to_string(g_slot[i]), g_rows[i], g_rhs[i], kInf);
  for (int i = 0; i < h_count(); ++i) m.add_row("h" + std::to_string(i), h_rows[i], h_rhs[i], h_rhs[i]);
  return m;
}

LpEvaluation evaluate(const LinearProgram& lp, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != lp.var_count()) {
    throw Error(ErrorCode::dimension_mismatch, "evaluate: point has wrong dimension");
  }
  LpEvaluation e;
  for (int j = 0; j < lp.var_count(); ++j) e.objective += lp.cost[j] * x[j];
  for (int i = 0; i < lp.g_count(); ++i) e.min_g = std::min(e.min_g, lp.g_rows[i].dot(x) - lp.g_rhs[i]);
  for (int i = 0; i < lp.h_count(); ++i) e.max_h = std::max(e.max_h, std::abs(lp.h_rows[i].dot(x) - lp.h_rhs[i]));
  return e;
}

}  // namespace ess
