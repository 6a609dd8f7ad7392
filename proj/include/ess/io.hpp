#pragma once

#include <string>
#include <vector>

#include "ess/instance.hpp"
#include "ess/solver.hpp"

namespace ess {

// Everything a run needs: the validated instance, solver settings from the
// config file, and a log of every default the loader filled in.
struct RunConfig {
  Instance instance;
  BilevelRequest request;
  double grid_step = 0.0;  // 0 selects S_total / 20
  std::vector<std::string> provenance;
};

// Loads file: header `t,customer_id,load_kw`, one row per (slot, customer),
// slots numbered 1..T. Customers are ordered by first appearance.
// Prices file: header `t,lmp_per_kwh,tou_per_kwh`, exactly T rows.
// Config file: `key = value` lines, `#` comments; unknown keys are rejected.
// An empty config path means all defaults. Errors name file, line and column.
RunConfig load_inputs(const std::string& loads_path, const std::string& prices_path,
                      const std::string& config_path);

// In-memory variant of load_inputs for already-read file contents; `*_name`
// is used in error messages only.
RunConfig parse_inputs(const std::string& loads_text, const std::string& loads_name,
                       const std::string& prices_text, const std::string& prices_name,
                       const std::string& config_text, const std::string& config_name);

std::string format_loads(const Instance& instance);
std::string format_prices(const Instance& instance);
// Writes every recognised key, so parse_inputs(format_*) reproduces the run.
std::string format_config(const RunConfig& config);

void write_inputs(const RunConfig& config, const std::string& loads_path, const std::string& prices_path,
                  const std::string& config_path);

// Keys accepted in the config file, in the order format_config writes them.
const std::vector<std::string>& config_keys();

// Round-trip-exact decimal rendering used by every emitted text file.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace ess
