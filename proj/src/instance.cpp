#include "ess/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace ess {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

void require_len(const Series& s, int n, const char* what) {
  require(static_cast<int>(s.size()) == n, ErrorCode::dimension_mismatch,
          std::string(what) + ": expected " + std::to_string(n) + " entries, got " +
              std::to_string(s.size()));
}

bool in_unit(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

void check_schedule_dims(const Instance& in, const ScheduleSet& s) {
  const int T = in.slots();
  const int N = in.customers();
  require(static_cast<int>(s.customer_ch.size()) == N && static_cast<int>(s.customer_dis.size()) == N,
          ErrorCode::dimension_mismatch, "schedule customer count mismatch");
  for (int n = 0; n < N; ++n) {
    require_len(s.customer_ch[n], T, "customer_ch");
    require_len(s.customer_dis[n], T, "customer_dis");
  }
  require_len(s.disco_ch, T, "disco_ch");
  require_len(s.disco_dis, T, "disco_dis");
}

double priced_net_cost(const Instance& in, const ScheduleSet& s, const Series& price) {
  const Series net = net_system_load(in, s);
  double cost = 0.0;
  for (int t = 0; t < in.slots(); ++t) cost += price[t] * net[t] * in.dt();
  return cost;
}

}  // namespace

double Division::total() const {
  return s_disco + std::accumulate(s_customer.begin(), s_customer.end(), 0.0);
}

ScheduleSet ScheduleSet::idle(const Instance& in) {
  const int T = in.slots();
  const int N = in.customers();
  ScheduleSet s;
  s.customer_ch.assign(N, Series(T, 0.0));
  s.customer_dis.assign(N, Series(T, 0.0));
  s.disco_ch.assign(T, 0.0);
  s.disco_dis.assign(T, 0.0);
  s.customer_peak.assign(N, 0.0);
  s.customer_valley.assign(N, 0.0);
  tighten_peaks(in, s);
  return s;
}

Instance validate_instance(Instance raw, const ValidateOptions& options) {
  Instance& in = raw;
  const int T = in.grid.slot_count;
  require(T >= 2, ErrorCode::validation, "slot_count must be at least 2");
  require(std::isfinite(in.grid.slot_hours) && in.grid.slot_hours > 0.0, ErrorCode::validation,
          "slot_hours must be positive");
  if (options.require_full_day) {
    require(std::abs(T * in.grid.slot_hours - 24.0) <= 1e-9, ErrorCode::validation,
            "slot_count * slot_hours must equal 24 h");
  }
  require(in.customer_count >= 1, ErrorCode::validation, "customer_count must be positive");
  const int N = in.customer_count;

  require_len(in.prices.lmp, T, "lmp");
  require_len(in.prices.tou, T, "tou");
  for (int t = 0; t < T; ++t) {
    require(std::isfinite(in.prices.lmp[t]), ErrorCode::validation, "lmp must be finite");
    require(std::isfinite(in.prices.tou[t]) && in.prices.tou[t] >= 0.0, ErrorCode::validation,
            "tou must be finite and nonnegative");
  }

  require(static_cast<int>(in.loads.customer_load.size()) == N, ErrorCode::dimension_mismatch,
          "customer_load: expected " + std::to_string(N) + " customers, got " +
              std::to_string(in.loads.customer_load.size()));
  if (in.loads.extra_base_load.empty()) in.loads.extra_base_load.assign(T, 0.0);
  require_len(in.loads.extra_base_load, T, "extra_base_load");
  in.loads.system_load = in.loads.extra_base_load;
  for (int n = 0; n < N; ++n) {
    require_len(in.loads.customer_load[n], T, "customer_load");
    for (int t = 0; t < T; ++t) {
      const double l = in.loads.customer_load[n][t];
      require(std::isfinite(l) && l >= 0.0, ErrorCode::validation,
              "negative or non-finite load for customer " + std::to_string(n) + " at slot " +
                  std::to_string(t));
      in.loads.system_load[t] += l;
    }
  }
  for (double l : in.loads.extra_base_load) {
    require(std::isfinite(l) && l >= 0.0, ErrorCode::validation, "negative extra_base_load");
  }

  auto& st = in.storage;
  require(std::isfinite(st.total_capacity) && st.total_capacity >= 0.0, ErrorCode::validation,
          "total_capacity must be nonnegative");
  require(st.eta_ch > 0.0 && st.eta_ch <= 1.0, ErrorCode::validation, "eta_ch must lie in (0,1]");
  require(st.eta_dis > 0.0 && st.eta_dis <= 1.0, ErrorCode::validation, "eta_dis must lie in (0,1]");
  require(std::isfinite(st.power_ratio) && st.power_ratio > 0.0, ErrorCode::validation,
          "power_ratio must be positive");
  require(in_unit(st.soc_lower) && in_unit(st.soc_upper) && st.soc_lower <= st.soc_upper,
          ErrorCode::validation, "soc bounds must satisfy 0 <= soc_lower <= soc_upper <= 1");
  if (st.soc_ini_customer.empty()) st.soc_ini_customer.assign(N, 0.5);
  require_len(st.soc_ini_customer, N, "soc_ini_customer");
  auto soc_ok = [&](double v) { return std::isfinite(v) && v >= st.soc_lower && v <= st.soc_upper; };
  for (int n = 0; n < N; ++n) {
    require(soc_ok(st.soc_ini_customer[n]), ErrorCode::validation,
            "soc_ini_customer[" + std::to_string(n) + "] outside [soc_lower, soc_upper]");
  }
  require(soc_ok(st.soc_ini_disco), ErrorCode::validation, "soc_ini_disco outside [soc_lower, soc_upper]");

  const auto& w = in.weights;
  require(std::isfinite(w.lambda1) && w.lambda1 > 0.0, ErrorCode::validation, "lambda1 must be positive");
  require(std::isfinite(w.lambda2) && w.lambda2 >= 0.0, ErrorCode::validation, "lambda2 must be nonnegative");
  require(std::isfinite(w.lambda3) && w.lambda3 >= 0.0, ErrorCode::validation, "lambda3 must be nonnegative");
  require(std::isfinite(w.alpha) && w.alpha >= 0.0, ErrorCode::validation, "alpha must be nonnegative");
  return raw;
}

Series net_system_load(const Instance& in, const ScheduleSet& s) {
  check_schedule_dims(in, s);
  require_len(in.loads.system_load, in.slots(), "system_load");
  Series net = in.loads.system_load;
  for (int t = 0; t < in.slots(); ++t) {
    for (int n = 0; n < in.customers(); ++n) net[t] += s.customer_ch[n][t] - s.customer_dis[n][t];
    net[t] += s.disco_ch[t] - s.disco_dis[t];
  }
  return net;
}

double system_peak(std::span<const double> net_load) {
  require(!net_load.empty(), ErrorCode::invalid_argument, "system_peak of an empty series");
  return *std::max_element(net_load.begin(), net_load.end());
}

double disco_cost(const Instance& in, const ScheduleSet& s) { return priced_net_cost(in, s, in.prices.lmp); }

double customer_cost_total(const Instance& in, const ScheduleSet& s) {
  return priced_net_cost(in, s, in.prices.tou);
}

double customer_llm_objective(const Instance& in, int n, const ScheduleSet& s) {
  require(n >= 0 && n < in.customers(), ErrorCode::invalid_argument, "customer index out of range");
  check_schedule_dims(in, s);
  double obj = 0.0;
  for (int t = 0; t < in.slots(); ++t)
    obj += in.prices.tou[t] * (s.customer_ch[n][t] - s.customer_dis[n][t]) * in.dt();
  return obj + in.weights.alpha * (s.customer_peak.at(n) - s.customer_valley.at(n));
}

double disco_llm_objective(const Instance& in, const ScheduleSet& s) {
  check_schedule_dims(in, s);
  double obj = 0.0;
  for (int t = 0; t < in.slots(); ++t) obj += in.prices.lmp[t] * (s.disco_ch[t] - s.disco_dis[t]) * in.dt();
  return obj;
}

double upper_objective(const Instance& in, const ScheduleSet& s) {
  const Series net = net_system_load(in, s);
  const double actual = system_peak(net);
  if (s.system_peak < actual - 1e-6 * std::max(1.0, std::abs(actual))) {
    std::ostringstream msg;
    msg << "system_peak " << s.system_peak << " below maximum net load " << actual;
    throw Error(ErrorCode::verification, msg.str());
  }
  const auto& w = in.weights;
  return w.lambda1 * s.system_peak + w.lambda2 * disco_cost(in, s) + w.lambda3 * customer_cost_total(in, s);
}

Series soc_trajectory(const StorageParams& st, double capacity, std::span<const double> ch,
                      std::span<const double> dis, double soc_ini, double slot_hours) {
  require(capacity >= 0.0, ErrorCode::invalid_argument, "negative capacity");
  require(ch.size() == dis.size(), ErrorCode::dimension_mismatch, "ch/dis length mismatch");
  Series energy(ch.size());
  double e = capacity * soc_ini;
  for (std::size_t t = 0; t < ch.size(); ++t) {
    e += ch[t] * slot_hours * st.eta_ch - dis[t] * slot_hours / st.eta_dis;
    energy[t] = e;
  }
  return energy;
}

void snap_powers(ScheduleSet& s, double tol) {
  const auto snap = [tol](Series& row) {
    for (double& v : row)
      if (std::abs(v) <= tol) v = 0.0;
  };
  for (auto& row : s.customer_ch) snap(row);
  for (auto& row : s.customer_dis) snap(row);
  snap(s.disco_ch);
  snap(s.disco_dis);
}

void tighten_peaks(const Instance& in, ScheduleSet& s) {
  const int T = in.slots();
  s.customer_peak.resize(in.customers());
  s.customer_valley.resize(in.customers());
  for (int n = 0; n < in.customers(); ++n) {
    double hi = -HUGE_VAL, lo = HUGE_VAL;
    for (int t = 0; t < T; ++t) {
      const double v = in.loads.customer_load[n][t] + s.customer_ch[n][t] - s.customer_dis[n][t];
      hi = std::max(hi, v);
      lo = std::min(lo, v);
    }
    s.customer_peak[n] = hi;
    s.customer_valley[n] = lo;
  }
  s.system_peak = system_peak(net_system_load(in, s));
}

Series customer_energy_shares(const Instance& in) {
  Series share(in.customers(), 0.0);
  double total = 0.0;
  for (int n = 0; n < in.customers(); ++n) {
    share[n] = std::accumulate(in.loads.customer_load[n].begin(), in.loads.customer_load[n].end(), 0.0);
    total += share[n];
  }
  for (double& v : share) v = total > 0.0 ? v / total : 1.0 / in.customers();
  return share;
}

double customer_attributed_cost(const Instance& in, int n, const ScheduleSet& s) {
  const Series share = customer_energy_shares(in);
  double cost = 0.0;
  for (int t = 0; t < in.slots(); ++t) {
    const double net = in.loads.customer_load[n][t] + s.customer_ch[n][t] - s.customer_dis[n][t] +
                       share[n] * (s.disco_ch[t] - s.disco_dis[t]);
    cost += in.prices.tou[t] * net * in.dt();
  }
  return cost;
}

}  // namespace ess
