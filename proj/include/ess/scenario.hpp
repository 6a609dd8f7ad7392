#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ess/io.hpp"
#include "ess/oracle.hpp"

namespace ess {

enum class LoadProfile { duck, typical, mixed };
enum class PriceShape { conforming, conflicting };

const char* to_string(LoadProfile profile);
const char* to_string(PriceShape shape);
LoadProfile parse_load_profile(const std::string& name);
PriceShape parse_price_shape(const std::string& name);

// Deterministic synthetic day. duck: midday trough and steep evening ramp;
// typical: morning and evening humps; mixed: first ceil(N/2) customers duck,
// the rest typical. TOU has three tiers. Conforming LMP follows the aggregate
// load; conflicting LMP moves against the TOU tiers. Storage defaults apart
// from total_capacity, which is 8 kWh per customer.
RunConfig gen_synthetic(LoadProfile profile, PriceShape shape, int customers, int slots, std::uint64_t seed);

double pearson(const Series& a, const Series& b);

enum class ScenarioId { disco_only = 1, customers_only = 2, shared = 3 };

const char* to_string(ScenarioId id);
ScenarioId scenario_from_int(int id);

struct PartyReduction {
  std::string party;  // disco, customers_1, customers_2, peak
  double baseline = 0.0;
  double actual = 0.0;
  double reduction_pct = 0.0;  // positive = improvement
};

struct SolverStats {
  std::string status;  // optimal | infeasible | unbounded | limit
  std::string method;  // lp | lpcc | bigm
  long nodes = 0;
  long lp_iterations = 0;
  int big_m_rounds = 0;
  double wall_seconds = 0.0;  // kept in memory only; reports stay byte-stable
  std::vector<std::string> notes;
};

struct DayReport {
  int day = 0;
  ScenarioId scenario = ScenarioId::shared;
  Division division;
  double upper_objective = 0.0;
  double baseline_upper_objective = 0.0;
  std::vector<PartyReduction> reductions;  // costs first, peak last
  Series original_load;
  Series net_load;
  SolverStats stats;
  std::string error;  // set when the day failed; other fields are then unset

  bool ok() const { return error.empty(); }
  const PartyReduction* find(const std::string& party) const;
};

// (baseline - actual) / |baseline| * 100; 0 when |baseline| is below 1e-12.
double reduction_percent(double baseline, double actual);

// Customers 0..ceil(N/2)-1 form group 1, the rest group 2 (absent when N = 1).
std::vector<std::vector<int>> customer_groups(int customers);

// Scenario 1 gives all capacity to DisCo and solves its LP with optimistic
// tie-breaking; scenario 2 pins DisCo to zero and optimizes the customer
// split; scenario 3 is the full bilevel problem. Baseline is the idle schedule.
DayReport run_scenario(const Instance& instance, ScenarioId scenario, const BilevelRequest& request, int day = 0);

struct DayInput {
  Matrix customer_load;
  PriceSeries prices;
};

struct CycleResult {
  std::vector<DayReport> reports;  // day-major, scenarios in request order
  std::vector<std::string> failures;
};

// Days are independent: each re-solves the division from its own inputs.
// A failing day is recorded and the cycle continues.
CycleResult daily_cycle(const RunConfig& base, const std::vector<DayInput>& days,
                        const std::vector<ScenarioId>& scenarios);

using Manifest = std::vector<std::pair<std::string, std::string>>;

// Writes division.csv, reduction.csv, series_day<d>.csv, manifest.csv and
// summary.json into `directory`, which must exist.
void emit_report(const std::vector<DayReport>& reports, const Manifest& manifest, const std::string& directory);

struct ReportBundle {
  std::vector<DayReport> reports;
  Manifest manifest;
};

// Parses summary.json, then overlays the division, reduction and series
// tables so every emitted file is checked against the others.
ReportBundle read_report(const std::string& directory);

// Human-readable reduction table for terminals.
std::string format_reduction_table(const std::vector<DayReport>& reports);

// oracle.csv (every grid point) and oracle.json (best point and notes).
void write_oracle_report(const OracleReport& report, const std::string& directory);

}  // namespace ess
