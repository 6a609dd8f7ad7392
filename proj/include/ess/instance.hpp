#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ess/error.hpp"

namespace ess {

using Series = std::vector<double>;
using Matrix = std::vector<std::vector<double>>;  // [row][slot]

struct TimeGrid {
  int slot_count = 48;
  double slot_hours = 0.5;
};

struct PriceSeries {
  Series lmp;  // wholesale, per kWh; may be negative
  Series tou;  // retail time-of-use tariff, per kWh
};

struct LoadSet {
  Matrix customer_load;   // [customer][slot], kW
  Series extra_base_load; // non-participating feeder load, kW
  Series system_load;     // derived by validate_instance
};

struct StorageParams {
  double total_capacity = 800.0;  // kWh
  double eta_ch = 0.92;
  double eta_dis = 0.92;
  double power_ratio = 0.25;  // k, per hour
  double soc_lower = 0.1;
  double soc_upper = 0.9;
  Series soc_ini_customer;  // one entry per customer
  double soc_ini_disco = 0.5;
};

struct Weights {
  double lambda1 = 0.8;
  double lambda2 = 6.69;
  double lambda3 = 1.0;
  double alpha = 0.01;
};

struct Instance {
  TimeGrid grid;
  PriceSeries prices;
  LoadSet loads;
  StorageParams storage;
  Weights weights;
  int customer_count = 0;

  int slots() const { return grid.slot_count; }
  int customers() const { return customer_count; }
  double dt() const { return grid.slot_hours; }
};

struct Division {
  double s_disco = 0.0;
  Series s_customer;

  double total() const;
};

struct ScheduleSet {
  Matrix customer_ch, customer_dis;
  Series disco_ch, disco_dis;
  Series customer_peak, customer_valley;
  double system_peak = 0.0;

  // All-zero schedule with peak/valley/system_peak set from the original loads.
  static ScheduleSet idle(const Instance& instance);
};

struct ValidateOptions {
  // Requires slot_count * slot_hours == 24 within 1e-9.
  bool require_full_day = false;
};

// Checks every invariant of the instance types and recomputes system_load.
// Throws Error(validation | dimension_mismatch) on the first violation found.
Instance validate_instance(Instance raw, const ValidateOptions& options = {});

// Per-slot system load after all storage actions; may be negative.
Series net_system_load(const Instance& instance, const ScheduleSet& schedules);

double system_peak(std::span<const double> net_load);

double disco_cost(const Instance& instance, const ScheduleSet& schedules);
double customer_cost_total(const Instance& instance, const ScheduleSet& schedules);

// TOU cost increment of customer n plus the alpha-weighted peak-valley spread.
double customer_llm_objective(const Instance& instance, int n, const ScheduleSet& schedules);

// DisCo's LMP-priced storage increment.
double disco_llm_objective(const Instance& instance, const ScheduleSet& schedules);

// Weighted peak + DisCo cost + customer cost. Throws if schedules.system_peak
// lies below the actual maximum net load.
double upper_objective(const Instance& instance, const ScheduleSet& schedules);

// Stored energy (kWh) after each slot.
Series soc_trajectory(const StorageParams& storage, double capacity, std::span<const double> ch,
                      std::span<const double> dis, double soc_ini, double slot_hours);

// Zeros every charge/discharge power with |p| <= tol (simplex round-off), in kW.
void snap_powers(ScheduleSet& schedules, double tol = 1e-7);

// Sets customer_peak/valley and system_peak to the values implied by the powers.
void tighten_peaks(const Instance& instance, ScheduleSet& schedules);

// Slot-wise energy share of each customer in the original load; used to
// attribute DisCo's storage actions when reporting per-customer costs.
Series customer_energy_shares(const Instance& instance);

// TOU cost of customer n including its share of DisCo's storage actions.
double customer_attributed_cost(const Instance& instance, int n, const ScheduleSet& schedules);

}  // namespace ess
