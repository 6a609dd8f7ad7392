#include "ess/ess.h"

#include <cmath>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "ess/error.hpp"
#include "ess/io.hpp"
#include "ess/mpec.hpp"
#include "ess/mps.hpp"
#include "ess/oracle.hpp"
#include "ess/scenario.hpp"

struct ess_run {
  ess::RunConfig config;
};

struct ess_result {
  ess_solve_status status = ESS_INFEASIBLE;
  double objective = 0.0;
  double bound = 0.0;
  long nodes = 0;
  ess::Division division;
  std::vector<std::string> notes;
};

struct ess_report {
  std::vector<ess::DayReport> reports;
  ess::Manifest manifest;
};

namespace {

thread_local std::string last_error;

ess_status map_code(ess::ErrorCode code) {
  switch (code) {
    case ess::ErrorCode::invalid_argument: return ESS_E_INVALID_ARGUMENT;
    case ess::ErrorCode::dimension_mismatch: return ESS_E_DIMENSION;
    case ess::ErrorCode::validation: return ESS_E_VALIDATION;
    case ess::ErrorCode::io: return ESS_E_IO;
    case ess::ErrorCode::parse: return ESS_E_PARSE;
    case ess::ErrorCode::solver: return ESS_E_SOLVER;
    case ess::ErrorCode::verification: return ESS_E_VERIFICATION;
    case ess::ErrorCode::limit: return ESS_E_LIMIT;
  }
  return ESS_E_INTERNAL;
}

ess_status fail(ess_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs `body` with every exception translated into a status and message.
template <class F>
ess_status guard(F&& body) {
  try {
    body();
    last_error.clear();
    return ESS_OK;
  } catch (const ess::Error& e) {
    return fail(map_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ESS_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ESS_E_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ess::Error(ess::ErrorCode::invalid_argument, what);
}

ess_solve_status map_status(ess::SolveStatus s) {
  switch (s) {
    case ess::SolveStatus::optimal: return ESS_OPTIMAL;
    case ess::SolveStatus::infeasible: return ESS_INFEASIBLE;
    case ess::SolveStatus::unbounded: return ESS_UNBOUNDED;
    case ess::SolveStatus::limit: return ESS_LIMIT;
  }
  return ESS_INFEASIBLE;
}

std::vector<ess::ScenarioId> scenario_list(const int* ids, std::size_t count) {
  require(ids != nullptr && count > 0, "at least one scenario is required");
  std::vector<ess::ScenarioId> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(ess::scenario_from_int(ids[i]));
  return out;
}

void append_cycle(const ess::CycleResult& cycle, ess_report* report) {
  report->reports.insert(report->reports.end(), cycle.reports.begin(), cycle.reports.end());
}

}  // namespace

extern "C" {

const char* ess_last_error(void) { return last_error.c_str(); }

const char* ess_status_name(ess_status status) {
  switch (status) {
    case ESS_OK: return "ok";
    case ESS_E_INVALID_ARGUMENT: return "invalid_argument";
    case ESS_E_DIMENSION: return "dimension_mismatch";
    case ESS_E_VALIDATION: return "validation";
    case ESS_E_IO: return "io";
    case ESS_E_PARSE: return "parse";
    case ESS_E_SOLVER: return "solver";
    case ESS_E_VERIFICATION: return "verification";
    case ESS_E_LIMIT: return "limit";
    case ESS_E_INTERNAL: return "internal";
  }
  return "unknown";
}

int ess_exit_code(ess_solve_status status) {
  switch (status) {
    case ESS_OPTIMAL: return 0;
    case ESS_INFEASIBLE: return 2;
    case ESS_UNBOUNDED: return 3;
    case ESS_LIMIT: return 4;
  }
  return 1;
}

ess_status ess_run_load(const char* loads_path, const char* prices_path, const char* config_path, ess_run** out) {
  return guard([&] {
    require(loads_path && prices_path && out, "ess_run_load: null argument");
    auto run = std::make_unique<ess_run>();
    run->config = ess::load_inputs(loads_path, prices_path, config_path ? config_path : "");
    *out = run.release();
  });
}

ess_status ess_run_generate(const char* profile, const char* shape, int customers, int slots, uint64_t seed,
                            ess_run** out) {
  return guard([&] {
    require(profile && shape && out, "ess_run_generate: null argument");
    auto run = std::make_unique<ess_run>();
    run->config = ess::gen_synthetic(ess::parse_load_profile(profile), ess::parse_price_shape(shape), customers,
                                     slots, seed);
    *out = run.release();
  });
}

ess_status ess_run_write(const ess_run* run, const char* loads_path, const char* prices_path,
                         const char* config_path) {
  return guard([&] {
    require(run && loads_path && prices_path && config_path, "ess_run_write: null argument");
    ess::write_inputs(run->config, loads_path, prices_path, config_path);
  });
}

void ess_run_free(ess_run* run) { delete run; }

int ess_run_customers(const ess_run* run) { return run ? run->config.instance.customers() : 0; }
int ess_run_slots(const ess_run* run) { return run ? run->config.instance.slots() : 0; }
double ess_run_total_capacity(const ess_run* run) {
  return run ? run->config.instance.storage.total_capacity : 0.0;
}

size_t ess_run_provenance_count(const ess_run* run) { return run ? run->config.provenance.size() : 0; }

const char* ess_run_provenance(const ess_run* run, size_t index) {
  if (!run || index >= run->config.provenance.size()) return nullptr;
  return run->config.provenance[index].c_str();
}

ess_status ess_run_set_mode(ess_run* run, const char* mode) {
  return guard([&] {
    require(run && mode, "ess_run_set_mode: null argument");
    const std::string m = mode;
    if (m == "bigm") run->config.request.mode = ess::SolveMode::bigm;
    else if (m == "lpcc") run->config.request.mode = ess::SolveMode::lpcc;
    else throw ess::Error(ess::ErrorCode::invalid_argument, "mode must be bigm or lpcc, got '" + m + "'");
  });
}

ess_status ess_run_set_time_limit(ess_run* run, double seconds) {
  return guard([&] {
    require(run != nullptr, "ess_run_set_time_limit: null run");
    require(std::isfinite(seconds) && seconds > 0.0, "time limit must be positive");
    run->config.request.options.time_limit = seconds;
  });
}

ess_status ess_run_set_grid_step(ess_run* run, double step) {
  return guard([&] {
    require(run != nullptr, "ess_run_set_grid_step: null run");
    require(std::isfinite(step) && step >= 0.0, "grid step must be >= 0");
    run->config.grid_step = step;
  });
}

ess_status ess_run_set_total_capacity(ess_run* run, double kwh) {
  return guard([&] {
    require(run != nullptr, "ess_run_set_total_capacity: null run");
    ess::Instance changed = run->config.instance;
    changed.storage.total_capacity = kwh;
    run->config.instance = ess::validate_instance(std::move(changed));
  });
}

ess_status ess_export_mps(const ess_run* run, const char* path, long* binaries, long* rows, long* cols) {
  return guard([&] {
    require(run && path, "ess_export_mps: null argument");
    auto mpec = std::make_shared<const ess::MpecModel>(ess::assemble_mpec(run->config.instance));
    const ess::MilpModel milp = ess::linearize_big_m(mpec, run->config.request.big_m);
    ess::export_mps(milp, path);
    if (binaries) *binaries = milp.binary_count();
    if (rows) *rows = milp.model.row_count();
    if (cols) *cols = milp.model.cols();
  });
}

ess_status ess_solve(const ess_run* run, ess_result** out) {
  return guard([&] {
    require(run && out, "ess_solve: null argument");
    const ess::BilevelOutcome outcome = ess::solve_bilevel(run->config.instance, run->config.request);
    auto r = std::make_unique<ess_result>();
    r->status = map_status(outcome.result.status);
    r->objective = outcome.result.objective;
    r->bound = outcome.result.bound;
    r->nodes = outcome.result.nodes;
    r->notes = outcome.notes;
    if (outcome.result.has_incumbent()) {
      r->division = outcome.solution.division;
      r->objective = outcome.solution.upper_objective;
    }
    *out = r.release();
  });
}

ess_status ess_oracle(const ess_run* run, const char* out_dir, ess_result** out) {
  return guard([&] {
    require(run && out, "ess_oracle: null argument");
    const auto& inst = run->config.instance;
    const double step = run->config.grid_step > 0.0 ? run->config.grid_step : inst.storage.total_capacity / 20.0;
    ess::OracleOptions options;
    options.solve = run->config.request.options;
    const ess::OracleReport report = ess::grid_oracle(inst, step, options);
    if (out_dir) ess::write_oracle_report(report, out_dir);
    auto r = std::make_unique<ess_result>();
    r->status = ESS_OPTIMAL;
    r->objective = report.best_upper_objective;
    r->bound = report.best_upper_objective;
    r->nodes = static_cast<long>(report.records.size());
    r->division = report.best_division;
    r->notes = report.notes;
    *out = r.release();
  });
}

void ess_result_free(ess_result* result) { delete result; }

ess_solve_status ess_result_status(const ess_result* r) { return r ? r->status : ESS_INFEASIBLE; }
double ess_result_objective(const ess_result* r) { return r ? r->objective : NAN; }
double ess_result_bound(const ess_result* r) { return r ? r->bound : NAN; }
long ess_result_nodes(const ess_result* r) { return r ? r->nodes : 0; }
double ess_result_disco_capacity(const ess_result* r) { return r ? r->division.s_disco : NAN; }

size_t ess_result_customer_capacities(const ess_result* r, double* out, size_t count) {
  if (!r) return 0;
  const auto& s = r->division.s_customer;
  if (out) {
    for (size_t i = 0; i < count && i < s.size(); ++i) out[i] = s[i];
  }
  return s.size();
}

size_t ess_result_note_count(const ess_result* r) { return r ? r->notes.size() : 0; }
const char* ess_result_note(const ess_result* r, size_t index) {
  if (!r || index >= r->notes.size()) return nullptr;
  return r->notes[index].c_str();
}

ess_status ess_report_new(ess_report** out) {
  return guard([&] {
    require(out != nullptr, "ess_report_new: null argument");
    *out = new ess_report();
  });
}

void ess_report_free(ess_report* report) { delete report; }

ess_status ess_run_scenario(const ess_run* run, int scenario, int day, ess_report* report) {
  return guard([&] {
    require(run && report, "ess_run_scenario: null argument");
    report->reports.push_back(
        ess::run_scenario(run->config.instance, ess::scenario_from_int(scenario), run->config.request, day));
  });
}

ess_status ess_run_cycle(const ess_run* run, const char* profile, const char* shape, int days, uint64_t seed,
                         const int* scenarios, size_t scenario_count, ess_report* report) {
  return guard([&] {
    require(run && profile && shape && report, "ess_run_cycle: null argument");
    require(days > 0, "ess_run_cycle: days must be positive");
    const auto ids = scenario_list(scenarios, scenario_count);
    const auto p = ess::parse_load_profile(profile);
    const auto s = ess::parse_price_shape(shape);
    const auto& inst = run->config.instance;
    std::vector<ess::DayInput> inputs;
    for (int d = 0; d < days; ++d) {
      const ess::RunConfig day = ess::gen_synthetic(p, s, inst.customers(), inst.slots(), seed + d);
      inputs.push_back({day.instance.loads.customer_load, day.instance.prices});
    }
    append_cycle(ess::daily_cycle(run->config, inputs, ids), report);
  });
}

ess_status ess_run_cycle_files(const ess_run* run, const char* const* loads_paths, const char* const* prices_paths,
                               size_t days, const int* scenarios, size_t scenario_count, ess_report* report) {
  return guard([&] {
    require(run && loads_paths && prices_paths && report, "ess_run_cycle_files: null argument");
    require(days > 0, "ess_run_cycle_files: days must be positive");
    const auto ids = scenario_list(scenarios, scenario_count);
    const std::string config = ess::format_config(run->config);
    std::vector<ess::DayInput> inputs;
    for (size_t d = 0; d < days; ++d) {
      require(loads_paths[d] && prices_paths[d], "ess_run_cycle_files: null path");
      const ess::RunConfig day = ess::parse_inputs(ess::read_text_file(loads_paths[d]), loads_paths[d],
                                                   ess::read_text_file(prices_paths[d]), prices_paths[d], config,
                                                   "<run config>");
      inputs.push_back({day.instance.loads.customer_load, day.instance.prices});
    }
    append_cycle(ess::daily_cycle(run->config, inputs, ids), report);
  });
}

ess_status ess_report_set_manifest(ess_report* report, const char* key, const char* value) {
  return guard([&] {
    require(report && key && value, "ess_report_set_manifest: null argument");
    for (auto& kv : report->manifest) {
      if (kv.first == key) {
        kv.second = value;
        return;
      }
    }
    report->manifest.emplace_back(key, value);
  });
}

ess_status ess_report_emit(const ess_report* report, const char* directory) {
  return guard([&] {
    require(report && directory, "ess_report_emit: null argument");
    ess::emit_report(report->reports, report->manifest, directory);
  });
}

ess_status ess_report_read(const char* directory, ess_report** out) {
  return guard([&] {
    require(directory && out, "ess_report_read: null argument");
    ess::ReportBundle bundle = ess::read_report(directory);
    auto r = std::make_unique<ess_report>();
    r->reports = std::move(bundle.reports);
    r->manifest = std::move(bundle.manifest);
    *out = r.release();
  });
}

size_t ess_report_count(const ess_report* report) { return report ? report->reports.size() : 0; }

ess_status ess_report_entry(const ess_report* report, size_t index, int* day, int* scenario, int* failed) {
  return guard([&] {
    require(report != nullptr, "ess_report_entry: null report");
    require(index < report->reports.size(), "ess_report_entry: index out of range");
    const auto& r = report->reports[index];
    if (day) *day = r.day;
    if (scenario) *scenario = static_cast<int>(r.scenario);
    if (failed) *failed = r.ok() ? 0 : 1;
  });
}

ess_status ess_report_reduction(const ess_report* report, size_t index, const char* party, double* percent) {
  return guard([&] {
    require(report && party && percent, "ess_report_reduction: null argument");
    require(index < report->reports.size(), "ess_report_reduction: index out of range");
    const ess::PartyReduction* p = report->reports[index].find(party);
    if (!p) throw ess::Error(ess::ErrorCode::invalid_argument, std::string("no reduction for party '") + party + "'");
    *percent = p->reduction_pct;
  });
}

ess_status ess_report_upper_objective(const ess_report* report, size_t index, double* value) {
  return guard([&] {
    require(report && value, "ess_report_upper_objective: null argument");
    require(index < report->reports.size(), "ess_report_upper_objective: index out of range");
    *value = report->reports[index].upper_objective;
  });
}

ess_status ess_report_table(const ess_report* report, char* buffer, size_t capacity, size_t* needed) {
  return guard([&] {
    require(report != nullptr, "ess_report_table: null report");
    const std::string text = ess::format_reduction_table(report->reports);
    if (needed) *needed = text.size() + 1;
    if (buffer && capacity > 0) {
      const size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buffer, text.data(), n);
      buffer[n] = '\0';
    }
  });
}

}  // extern "C"
