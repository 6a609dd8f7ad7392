// Command-line front end. Talks to the library only through ess.h.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ess/ess.h"

namespace {

struct RunDeleter {
  void operator()(ess_run* r) const { ess_run_free(r); }
};
struct ResultDeleter {
  void operator()(ess_result* r) const { ess_result_free(r); }
};
struct ReportDeleter {
  void operator()(ess_report* r) const { ess_report_free(r); }
};
using RunPtr = std::unique_ptr<ess_run, RunDeleter>;
using ResultPtr = std::unique_ptr<ess_result, ResultDeleter>;
using ReportPtr = std::unique_ptr<ess_report, ReportDeleter>;

// Exit code for library errors; solver outcomes use 0/2/3/4.
constexpr int kErrorExit = 1;

struct CallFailed {
  int code;
};

void check(ess_status st, const char* what) {
  if (st == ESS_OK) return;
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, ess_last_error(), ess_status_name(st));
  throw CallFailed{kErrorExit};
}

struct Global {
  unsigned long long seed = 1;
  std::optional<std::string> mode;  // unset keeps the config file's mode
  std::optional<double> grid_step;
  std::optional<double> time_limit;
};

struct Inputs {
  std::string loads, prices, config;
  std::string profile = "duck";
  std::string shape = "conflicting";
  int customers = 2;
  int slots = 12;
  std::optional<double> capacity;

  void attach(CLI::App* app) {
    app->add_option("--loads", loads, "loads file (t,customer_id,load_kw)");
    app->add_option("--prices", prices, "prices file (t,lmp_per_kwh,tou_per_kwh)");
    app->add_option("--config", config, "key = value config file");
    app->add_option("--profile", profile, "synthetic load profile when no files are given")
        ->check(CLI::IsMember({"duck", "typical", "mixed"}));
    app->add_option("--shape", shape, "synthetic price shape")->check(CLI::IsMember({"conforming", "conflicting"}));
    app->add_option("-N,--customers", customers, "synthetic customer count")->check(CLI::PositiveNumber);
    app->add_option("-T,--slots", slots, "synthetic slot count")->check(CLI::PositiveNumber);
    app->add_option("--capacity", capacity, "override total storage capacity (kWh)")->check(CLI::NonNegativeNumber);
  }

  bool from_files() const { return !loads.empty(); }
};

RunPtr open_run(const Inputs& in, const Global& g) {
  ess_run* raw = nullptr;
  if (in.from_files()) {
    if (in.prices.empty()) {
      std::fprintf(stderr, "error: --loads needs --prices\n");
      throw CallFailed{kErrorExit};
    }
    check(ess_run_load(in.loads.c_str(), in.prices.c_str(), in.config.c_str(), &raw), "loading inputs");
  } else {
    check(ess_run_generate(in.profile.c_str(), in.shape.c_str(), in.customers, in.slots, g.seed, &raw),
          "generating synthetic inputs");
  }
  RunPtr run(raw);
  if (g.mode) check(ess_run_set_mode(run.get(), g.mode->c_str()), "--mode");
  if (g.time_limit) check(ess_run_set_time_limit(run.get(), *g.time_limit), "--time-limit");
  if (g.grid_step) check(ess_run_set_grid_step(run.get(), *g.grid_step), "--grid-step");
  if (in.capacity) check(ess_run_set_total_capacity(run.get(), *in.capacity), "--capacity");
  return run;
}

void print_division(const ess_result* r) {
  std::printf("division: disco %.6f", ess_result_disco_capacity(r));
  const size_t n = ess_result_customer_capacities(r, nullptr, 0);
  std::vector<double> caps(n);
  ess_result_customer_capacities(r, caps.data(), n);
  for (size_t i = 0; i < n; ++i) std::printf(" c%zu %.6f", i + 1, caps[i]);
  std::printf("\n");
  for (size_t i = 0; i < ess_result_note_count(r); ++i) std::printf("note: %s\n", ess_result_note(r, i));
}

void print_table(const ess_report* report) {
  size_t needed = 0;
  check(ess_report_table(report, nullptr, 0, &needed), "formatting report");
  std::string text(needed, '\0');
  check(ess_report_table(report, text.data(), text.size(), &needed), "formatting report");
  text.resize(needed - 1);
  std::fputs(text.c_str(), stdout);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    std::fprintf(stderr, "error: cannot create %s: %s\n", dir.c_str(), ec.message().c_str());
    throw CallFailed{kErrorExit};
  }
}

void fill_manifest(ess_report* report, const ess_run* run, const Inputs& in, const Global& g,
                   const std::string& command) {
  auto set = [&](const std::string& k, const std::string& v) {
    check(ess_report_set_manifest(report, k.c_str(), v.c_str()), "manifest");
  };
  set("command", command);
  if (g.mode) set("mode", *g.mode);
  if (in.from_files()) {
    set("loads", in.loads);
    set("prices", in.prices);
    set("config", in.config);
  } else {
    set("seed", std::to_string(g.seed));
    set("profile", in.profile);
    set("shape", in.shape);
  }
  set("customers", std::to_string(ess_run_customers(run)));
  set("slots", std::to_string(ess_run_slots(run)));
  for (size_t i = 0; i < ess_run_provenance_count(run); ++i)
    set("provenance." + std::to_string(i + 1), ess_run_provenance(run, i));
}

int report_exit(const ess_report* report) {
  for (size_t i = 0; i < ess_report_count(report); ++i) {
    int failed = 0;
    check(ess_report_entry(report, i, nullptr, nullptr, &failed), "report entry");
    if (failed) return kErrorExit;
  }
  return 0;
}

std::vector<int> parse_scenarios(const std::string& text) {
  if (text == "all") return {1, 2, 3};
  std::vector<int> out;
  for (char c : text) {
    if (c == ',') continue;
    if (c < '1' || c > '3') throw CLI::ValidationError("--scenario", "expected 1, 2, 3, a comma list or 'all'");
    out.push_back(c - '0');
  }
  if (out.empty()) throw CLI::ValidationError("--scenario", "no scenario given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared energy-storage capacity planning"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Global g;
  app.add_option("--seed", g.seed, "seed for synthetic data");
  app.add_option("--mode", g.mode, "bilevel solver")->check(CLI::IsMember({"bigm", "lpcc"}));
  app.add_option("--grid-step", g.grid_step, "grid oracle step (default S_total/20)")->check(CLI::PositiveNumber);
  app.add_option("--time-limit", g.time_limit, "solver time limit in seconds")->check(CLI::PositiveNumber);

  Inputs in;
  std::string out_path, in_dir;
  std::string scenarios = "all";
  int day = 1;
  int days = 1;
  std::vector<std::string> day_loads, day_prices;

  auto* gen = app.add_subcommand("gen-data", "write synthetic loads, prices and config files");
  in.attach(gen);
  gen->add_option("--out", out_path, "output directory")->required();

  auto* build = app.add_subcommand("build", "export the big-M MILP as MPS");
  in.attach(build);
  build->add_option("--out", out_path, "MPS file")->required();

  auto* solve = app.add_subcommand("solve", "solve the bilevel problem");
  in.attach(solve);

  auto* oracle = app.add_subcommand("oracle", "exhaustive grid search over divisions");
  in.attach(oracle);
  oracle->add_option("--out", out_path, "directory for oracle.csv and oracle.json");

  auto* scenario = app.add_subcommand("scenario", "compare capacity-sharing scenarios on one day");
  in.attach(scenario);
  scenario->add_option("--scenario", scenarios, "1, 2, 3, comma list or all");
  scenario->add_option("--day", day, "day index recorded in the report")->check(CLI::PositiveNumber);
  scenario->add_option("--out", out_path, "report directory");

  auto* cycle = app.add_subcommand("cycle", "re-solve the division day by day");
  in.attach(cycle);
  cycle->add_option("--days", days, "synthetic days (seeds seed, seed+1, ...)")->check(CLI::PositiveNumber);
  cycle->add_option("--day-loads", day_loads, "per-day loads files");
  cycle->add_option("--day-prices", day_prices, "per-day prices files");
  cycle->add_option("--scenario", scenarios, "1, 2, 3, comma list or all");
  cycle->add_option("--out", out_path, "report directory");

  auto* report = app.add_subcommand("report", "print the reduction table of an emitted report");
  report->add_option("--in", in_dir, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      RunPtr run = open_run(in, g);
      ensure_dir(out_path);
      const std::filesystem::path dir(out_path);
      check(ess_run_write(run.get(), (dir / "loads.csv").c_str(), (dir / "prices.csv").c_str(),
                          (dir / "config.txt").c_str()),
            "writing inputs");
      std::printf("wrote %s/{loads.csv,prices.csv,config.txt}\n", out_path.c_str());
      return 0;
    }
    if (*build) {
      RunPtr run = open_run(in, g);
      long binaries = 0, rows = 0, cols = 0;
      check(ess_export_mps(run.get(), out_path.c_str(), &binaries, &rows, &cols), "exporting MPS");
      std::printf("rows %ld cols %ld binaries %ld\n", rows, cols, binaries);
      return 0;
    }
    if (*solve || *oracle) {
      RunPtr run = open_run(in, g);
      ess_result* raw = nullptr;
      if (*solve) {
        check(ess_solve(run.get(), &raw), "solving");
      } else {
        if (!out_path.empty()) ensure_dir(out_path);
        check(ess_oracle(run.get(), out_path.empty() ? nullptr : out_path.c_str(), &raw), "grid oracle");
      }
      ResultPtr result(raw);
      const ess_solve_status st = ess_result_status(result.get());
      static const char* names[] = {"optimal", "infeasible", "unbounded", "limit"};
      std::printf("status %s objective %.10g bound %.10g nodes %ld\n", names[st], ess_result_objective(result.get()),
                  ess_result_bound(result.get()), ess_result_nodes(result.get()));
      if (st == ESS_OPTIMAL || st == ESS_LIMIT) print_division(result.get());
      return ess_exit_code(st);
    }
    if (*scenario || *cycle) {
      const std::vector<int> ids = parse_scenarios(scenarios);
      RunPtr run = open_run(in, g);
      ess_report* raw = nullptr;
      check(ess_report_new(&raw), "report");
      ReportPtr rep(raw);
      if (*scenario) {
        for (int id : ids) check(ess_run_scenario(run.get(), id, day, rep.get()), "scenario");
      } else if (!day_loads.empty() || !day_prices.empty()) {
        if (day_loads.size() != day_prices.size()) {
          std::fprintf(stderr, "error: --day-loads and --day-prices need the same number of files\n");
          return kErrorExit;
        }
        std::vector<const char*> lp, pp;
        for (size_t i = 0; i < day_loads.size(); ++i) {
          lp.push_back(day_loads[i].c_str());
          pp.push_back(day_prices[i].c_str());
        }
        check(ess_run_cycle_files(run.get(), lp.data(), pp.data(), lp.size(), ids.data(), ids.size(), rep.get()),
              "daily cycle");
      } else {
        check(ess_run_cycle(run.get(), in.profile.c_str(), in.shape.c_str(), days, g.seed, ids.data(), ids.size(),
                            rep.get()),
              "daily cycle");
      }
      print_table(rep.get());
      if (!out_path.empty()) {
        fill_manifest(rep.get(), run.get(), in, g, *scenario ? "scenario" : "cycle");
        ensure_dir(out_path);
        check(ess_report_emit(rep.get(), out_path.c_str()), "emitting report");
      }
      return report_exit(rep.get());
    }
    if (*report) {
      ess_report* raw = nullptr;
      check(ess_report_read(in_dir.c_str(), &raw), "reading report");
      ReportPtr rep(raw);
      print_table(rep.get());
      return 0;
    }
  } catch (const CallFailed& f) {
    return f.code;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return kErrorExit;
}
