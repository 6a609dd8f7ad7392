#include "ess/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace ess {

namespace {

using json = nlohmann::json;

// Uniform on [0, 1) from the top 53 bits; independent of library distributions.
double uniform(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

double bump(double h, double center, double width) {
  const double d = (h - center) / width;
  return std::exp(-0.5 * d * d);
}

double duck_shape(double h) {
  return 1.0 + 0.5 * bump(h, 7.0, 1.5) - 0.7 * bump(h, 13.0, 2.5) + 1.6 * bump(h, 19.0, 2.0);
}

double typical_shape(double h) { return 0.8 + 1.0 * bump(h, 8.0, 1.5) + 1.3 * bump(h, 19.0, 2.0); }

double tou_tier(double h) {
  if (h >= 16.0 && h < 21.0) return 0.45;
  if (h >= 7.0 && h < 22.0) return 0.3;
  return 0.2;
}

Series standardized(const Series& s) {
  const double n = static_cast<double>(s.size());
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  Series z(s.size(), 0.0);
  if (sd > 0.0)
    for (std::size_t k = 0; k < s.size(); ++k) z[k] = (s[k] - mean) / sd;
  return z;
}

std::string scenario_key(ScenarioId id) { return "scenario_" + std::to_string(static_cast<int>(id)); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void fill_reductions(const Instance& in, const ScheduleSet& actual, DayReport& r) {
  const ScheduleSet idle = ScheduleSet::idle(in);
  auto add = [&](const std::string& party, double b, double a) {
    r.reductions.push_back({party, b, a, reduction_percent(b, a)});
  };
  add("disco", disco_cost(in, idle), disco_cost(in, actual));
  const auto groups = customer_groups(in.customers());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double b = 0.0, a = 0.0;
    for (int n : groups[g]) {
      b += customer_attributed_cost(in, n, idle);
      a += customer_attributed_cost(in, n, actual);
    }
    const double size = static_cast<double>(groups[g].size());
    add("customers_" + std::to_string(g + 1), b / size, a / size);
  }
  r.original_load = in.loads.system_load;
  r.net_load = net_system_load(in, actual);
  add("peak", system_peak(r.original_load), system_peak(r.net_load));
  r.baseline_upper_objective = upper_objective(in, idle);
}

json party_json(const PartyReduction& p) {
  return {{"party", p.party}, {"baseline", p.baseline}, {"actual", p.actual}, {"reduction_pct", p.reduction_pct}};
}

json report_json(const DayReport& r) {
  json j;
  j["day"] = r.day;
  j["scenario"] = static_cast<int>(r.scenario);
  if (!r.ok()) {
    j["error"] = r.error;
    return j;
  }
  j["division"] = {{"disco", r.division.s_disco}, {"customers", r.division.s_customer}};
  j["upper_objective"] = r.upper_objective;
  j["baseline_upper_objective"] = r.baseline_upper_objective;
  j["reductions"] = json::array();
  for (const auto& p : r.reductions) j["reductions"].push_back(party_json(p));
  j["original_load"] = r.original_load;
  j["net_load"] = r.net_load;
  j["stats"] = {{"status", r.stats.status},
                {"method", r.stats.method},
                {"nodes", r.stats.nodes},
                {"lp_iterations", r.stats.lp_iterations},
                {"big_m_rounds", r.stats.big_m_rounds},
                {"notes", r.stats.notes}};
  return j;
}

DayReport report_from_json(const json& j) {
  DayReport r;
  r.day = j.at("day").get<int>();
  r.scenario = scenario_from_int(j.at("scenario").get<int>());
  if (j.contains("error")) {
    r.error = j.at("error").get<std::string>();
    return r;
  }
  r.division.s_disco = j.at("division").at("disco").get<double>();
  r.division.s_customer = j.at("division").at("customers").get<Series>();
  r.upper_objective = j.at("upper_objective").get<double>();
  r.baseline_upper_objective = j.at("baseline_upper_objective").get<double>();
  for (const auto& p : j.at("reductions"))
    r.reductions.push_back({p.at("party").get<std::string>(), p.at("baseline").get<double>(),
                            p.at("actual").get<double>(), p.at("reduction_pct").get<double>()});
  r.original_load = j.at("original_load").get<Series>();
  r.net_load = j.at("net_load").get<Series>();
  const json& s = j.at("stats");
  r.stats.status = s.at("status").get<std::string>();
  r.stats.method = s.at("method").get<std::string>();
  r.stats.nodes = s.at("nodes").get<long>();
  r.stats.lp_iterations = s.at("lp_iterations").get<long>();
  r.stats.big_m_rounds = s.at("big_m_rounds").get<int>();
  r.stats.notes = s.at("notes").get<std::vector<std::string>>();
  return r;
}

// Minimal reader for the tables emit_report writes: header row, then cells.
std::vector<std::vector<std::string>> read_table(const std::string& path, const std::string& header) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      if (line.rfind(header, 0) != 0) throw Error(ErrorCode::parse, path + ": unexpected header '" + line + "'");
      have_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      cells.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  if (!have_header) throw Error(ErrorCode::parse, path + ": missing header");
  return rows;
}

double parse_cell(const std::string& path, const std::string& cell) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != cell.size() || cell.empty()) throw Error(ErrorCode::parse, path + ": bad number '" + cell + "'");
  return v;
}

}  // namespace

const char* to_string(LoadProfile p) {
  switch (p) {
    case LoadProfile::duck: return "duck";
    case LoadProfile::typical: return "typical";
    case LoadProfile::mixed: return "mixed";
  }
  return "unknown";
}

const char* to_string(PriceShape s) { return s == PriceShape::conforming ? "conforming" : "conflicting"; }

LoadProfile parse_load_profile(const std::string& name) {
  if (name == "duck") return LoadProfile::duck;
  if (name == "typical") return LoadProfile::typical;
  if (name == "mixed") return LoadProfile::mixed;
  throw Error(ErrorCode::invalid_argument, "unknown load profile '" + name + "' (duck, typical, mixed)");
}

PriceShape parse_price_shape(const std::string& name) {
  if (name == "conforming") return PriceShape::conforming;
  if (name == "conflicting") return PriceShape::conflicting;
  throw Error(ErrorCode::invalid_argument, "unknown price shape '" + name + "' (conforming, conflicting)");
}

RunConfig gen_synthetic(LoadProfile profile, PriceShape shape, int customers, int slots, std::uint64_t seed) {
  if (customers < 1 || slots < 2) throw Error(ErrorCode::invalid_argument, "gen_synthetic needs N >= 1 and T >= 2");
  std::mt19937_64 g(seed);
  RunConfig cfg;
  Instance& in = cfg.instance;
  in.grid = {slots, 24.0 / slots};
  in.customer_count = customers;
  in.storage.total_capacity = 8.0 * customers;

  const int duck_count = profile == LoadProfile::duck ? customers
                         : profile == LoadProfile::typical ? 0
                                                           : (customers + 1) / 2;
  in.loads.customer_load.assign(customers, Series(slots, 0.0));
  for (int n = 0; n < customers; ++n) {
    const double scale = 1.5 + 2.0 * uniform(g);
    for (int t = 0; t < slots; ++t) {
      const double h = (t + 0.5) * in.dt();
      const double base = n < duck_count ? duck_shape(h) : typical_shape(h);
      in.loads.customer_load[n][t] = scale * base * (1.0 + 0.1 * (uniform(g) - 0.5));
    }
  }

  Series aggregate(slots, 0.0);
  for (const auto& row : in.loads.customer_load)
    for (int t = 0; t < slots; ++t) aggregate[t] += row[t];
  in.prices.tou.resize(slots);
  for (int t = 0; t < slots; ++t) in.prices.tou[t] = tou_tier((t + 0.5) * in.dt());
  const Series z = shape == PriceShape::conforming ? standardized(aggregate) : standardized(in.prices.tou);
  const double direction = shape == PriceShape::conforming ? 1.0 : -1.0;
  in.prices.lmp.resize(slots);
  for (int t = 0; t < slots; ++t)
    in.prices.lmp[t] = std::max(0.005, 0.04 + direction * 0.015 * z[t] + 0.006 * (uniform(g) - 0.5));

  cfg.instance = validate_instance(std::move(in));
  cfg.provenance.push_back(std::string("synthetic day: profile ") + to_string(profile) + ", prices " +
                           to_string(shape) + ", seed " + std::to_string(seed));
  cfg.provenance.push_back("total_capacity = 8 kWh per customer = " + format_double(cfg.instance.storage.total_capacity));
  return cfg;
}

double pearson(const Series& a, const Series& b) {
  if (a.size() != b.size() || a.empty()) throw Error(ErrorCode::dimension_mismatch, "pearson: length mismatch");
  const Series za = standardized(a), zb = standardized(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += za[k] * zb[k];
  return s / static_cast<double>(a.size());
}

const char* to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::disco_only: return "disco_only";
    case ScenarioId::customers_only: return "customers_only";
    case ScenarioId::shared: return "shared";
  }
  return "unknown";
}

ScenarioId scenario_from_int(int id) {
  if (id < 1 || id > 3) throw Error(ErrorCode::invalid_argument, "scenario must be 1, 2 or 3");
  return static_cast<ScenarioId>(id);
}

const PartyReduction* DayReport::find(const std::string& party) const {
  for (const auto& p : reductions)
    if (p.party == party) return &p;
  return nullptr;
}

double reduction_percent(double baseline, double actual) {
  if (std::abs(baseline) < 1e-12) return 0.0;
  return (baseline - actual) / std::abs(baseline) * 100.0;
}

std::vector<std::vector<int>> customer_groups(int customers) {
  std::vector<std::vector<int>> groups;
  const int first = (customers + 1) / 2;
  groups.emplace_back();
  for (int n = 0; n < first; ++n) groups.back().push_back(n);
  if (customers > first) {
    groups.emplace_back();
    for (int n = first; n < customers; ++n) groups.back().push_back(n);
  }
  return groups;
}

DayReport run_scenario(const Instance& in, ScenarioId scenario, const BilevelRequest& request, int day) {
  const auto t0 = std::chrono::steady_clock::now();
  DayReport r;
  r.day = day;
  r.scenario = scenario;
  ScheduleSet schedules;
  const std::string context = "day " + std::to_string(day) + " " + scenario_key(scenario) + ": ";
  try {
    if (scenario == ScenarioId::disco_only) {
      Division d;
      d.s_disco = in.storage.total_capacity;
      d.s_customer.assign(in.customers(), 0.0);
      const DivisionEvaluation eval = evaluate_division(in, d, request.options);
      r.division = d;
      schedules = eval.schedules;
      r.stats.status = "optimal";
      r.stats.method = "lp";
    } else {
      BilevelRequest req = request;
      if (scenario == ScenarioId::customers_only) req.fixed_disco_capacity = 0.0;
      const BilevelOutcome out = solve_bilevel(in, req);
      if (!out.result.has_incumbent())
        throw Error(ErrorCode::solver, std::string("no feasible division found (status ") +
                                           to_string(out.result.status) + ")");
      r.division = out.solution.division;
      schedules = out.solution.schedules;
      r.stats.status = to_string(out.result.status);
      r.stats.method = to_string(out.mode);
      r.stats.nodes = out.result.nodes;
      r.stats.lp_iterations = out.result.lp_iterations;
      r.stats.big_m_rounds = out.big_m_rounds;
      r.stats.notes = out.notes;
    }
    snap_powers(schedules);
    tighten_peaks(in, schedules);
    r.upper_objective = upper_objective(in, schedules);
    fill_reductions(in, schedules, r);
  } catch (const Error& e) {
    throw Error(e.code(), context + e.what());
  }
  r.stats.wall_seconds = seconds_since(t0);
  return r;
}

CycleResult daily_cycle(const RunConfig& base, const std::vector<DayInput>& days,
                        const std::vector<ScenarioId>& scenarios) {
  if (days.empty()) throw Error(ErrorCode::invalid_argument, "daily_cycle needs at least one day");
  if (scenarios.empty()) throw Error(ErrorCode::invalid_argument, "daily_cycle needs at least one scenario");
  CycleResult out;
  for (std::size_t d = 0; d < days.size(); ++d) {
    const int day = static_cast<int>(d) + 1;
    Instance in;
    try {
      in = base.instance;
      in.loads.customer_load = days[d].customer_load;
      in.customer_count = static_cast<int>(days[d].customer_load.size());
      in.prices = days[d].prices;
      if (static_cast<int>(in.storage.soc_ini_customer.size()) != in.customer_count) in.storage.soc_ini_customer.clear();
      in = validate_instance(std::move(in));
    } catch (const Error& e) {
      for (ScenarioId s : scenarios) {
        DayReport r;
        r.day = day;
        r.scenario = s;
        r.error = e.what();
        out.reports.push_back(std::move(r));
      }
      out.failures.push_back("day " + std::to_string(day) + ": " + e.what());
      continue;
    }
    for (ScenarioId s : scenarios) {
      try {
        out.reports.push_back(run_scenario(in, s, base.request, day));
      } catch (const Error& e) {
        DayReport r;
        r.day = day;
        r.scenario = s;
        r.error = e.what();
        out.reports.push_back(std::move(r));
        out.failures.push_back(e.what());
      }
    }
  }
  return out;
}

void emit_report(const std::vector<DayReport>& reports, const Manifest& manifest, const std::string& dir) {
  if (reports.empty()) throw Error(ErrorCode::invalid_argument, "emit_report: no reports");
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "emit_report: " + dir + " is not a directory");
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  auto num = [](double v) { return format_double(v); };

  std::string division = "day,scenario,party,capacity_kwh\n";
  std::string reduction =
      "# customers_1 = first ceil(N/2) customers, customers_2 = the rest; group values are per-customer averages\n"
      "day,scenario,party,baseline,actual,reduction_pct\n";
  for (const auto& r : reports) {
    if (!r.ok()) continue;
    const std::string key = std::to_string(r.day) + "," + std::to_string(static_cast<int>(r.scenario)) + ",";
    division += key + "disco," + num(r.division.s_disco) + "\n";
    for (std::size_t n = 0; n < r.division.s_customer.size(); ++n)
      division += key + "customer_" + std::to_string(n + 1) + "," + num(r.division.s_customer[n]) + "\n";
    for (const auto& p : r.reductions)
      reduction += key + p.party + "," + num(p.baseline) + "," + num(p.actual) + "," + num(p.reduction_pct) + "\n";
  }
  write_text_file(path("division.csv"), division);
  write_text_file(path("reduction.csv"), reduction);

  std::map<int, std::vector<const DayReport*>> by_day;
  for (const auto& r : reports)
    if (r.ok()) by_day[r.day].push_back(&r);
  for (const auto& [day, list] : by_day) {
    std::string text = "t,original";
    for (const DayReport* r : list) text += "," + scenario_key(r->scenario);
    text += "\n";
    for (std::size_t t = 0; t < list.front()->original_load.size(); ++t) {
      text += std::to_string(t + 1) + "," + num(list.front()->original_load[t]);
      for (const DayReport* r : list) text += "," + num(r->net_load[t]);
      text += "\n";
    }
    write_text_file(path("series_day" + std::to_string(day) + ".csv"), text);
  }

  std::string man = "key,value\n";
  for (const auto& [k, v] : manifest) {
    if (k.find(',') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos)
      throw Error(ErrorCode::invalid_argument, "manifest entries must be single-line and keys comma-free");
    man += k + "," + v + "\n";
  }
  write_text_file(path("manifest.csv"), man);

  json summary;
  summary["manifest"] = json::array();
  for (const auto& [k, v] : manifest) summary["manifest"].push_back({k, v});
  summary["reports"] = json::array();
  for (const auto& r : reports) summary["reports"].push_back(report_json(r));
  write_text_file(path("summary.json"), summary.dump(2) + "\n");
}

ReportBundle read_report(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const std::string& name) { return (fs::path(dir) / name).string(); };
  ReportBundle bundle;
  json summary;
  try {
    summary = json::parse(read_text_file(path("summary.json")));
    for (const auto& kv : summary.at("manifest"))
      bundle.manifest.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    for (const auto& r : summary.at("reports")) bundle.reports.push_back(report_from_json(r));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, path("summary.json") + ": " + e.what());
  }

  std::map<std::pair<int, int>, DayReport*> index;
  for (auto& r : bundle.reports)
    if (r.ok()) index[{r.day, static_cast<int>(r.scenario)}] = &r;
  auto lookup = [&](const std::string& file, const std::string& day, const std::string& scen) -> DayReport& {
    const auto it = index.find({static_cast<int>(parse_cell(file, day)), static_cast<int>(parse_cell(file, scen))});
    if (it == index.end()) throw Error(ErrorCode::parse, file + ": row for day " + day + " scenario " + scen + " not in summary");
    return *it->second;
  };

  const std::string div_file = path("division.csv");
  for (const auto& row : read_table(div_file, "day,scenario,party,capacity_kwh")) {
    if (row.size() != 4) throw Error(ErrorCode::parse, div_file + ": expected 4 fields");
    DayReport& r = lookup(div_file, row[0], row[1]);
    const double v = parse_cell(div_file, row[3]);
    if (row[2] == "disco") {
      r.division.s_disco = v;
    } else if (row[2].rfind("customer_", 0) == 0) {
      const std::size_t n = static_cast<std::size_t>(parse_cell(div_file, row[2].substr(9))) - 1;
      if (n >= r.division.s_customer.size()) throw Error(ErrorCode::parse, div_file + ": customer index out of range");
      r.division.s_customer[n] = v;
    } else {
      throw Error(ErrorCode::parse, div_file + ": unknown party '" + row[2] + "'");
    }
  }

  const std::string red_file = path("reduction.csv");
  for (const auto& row : read_table(red_file, "day,scenario,party,baseline,actual,reduction_pct")) {
    if (row.size() != 6) throw Error(ErrorCode::parse, red_file + ": expected 6 fields");
    DayReport& r = lookup(red_file, row[0], row[1]);
    auto* p = const_cast<PartyReduction*>(r.find(row[2]));
    if (!p) throw Error(ErrorCode::parse, red_file + ": unknown party '" + row[2] + "'");
    p->baseline = parse_cell(red_file, row[3]);
    p->actual = parse_cell(red_file, row[4]);
    p->reduction_pct = parse_cell(red_file, row[5]);
  }

  std::map<int, bool> days;
  for (const auto& r : bundle.reports)
    if (r.ok()) days[r.day] = true;
  for (const auto& [day, unused] : days) {
    (void)unused;
    const std::string file = path("series_day" + std::to_string(day) + ".csv");
    std::istringstream in(read_text_file(file));
    std::string header;
    std::getline(in, header);
    std::vector<std::string> cols;
    for (std::size_t pos = 0;;) {
      const auto comma = header.find(',', pos);
      cols.push_back(header.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (cols.size() < 2 || cols[0] != "t" || cols[1] != "original")
      throw Error(ErrorCode::parse, file + ": header must start with t,original");
    const auto rows = read_table(file, header);
    for (std::size_t c = 2; c < cols.size(); ++c) {
      const int scen = std::stoi(cols[c].substr(cols[c].find('_') + 1));
      const auto it = index.find({day, scen});
      if (it == index.end()) throw Error(ErrorCode::parse, file + ": column " + cols[c] + " not in summary");
      DayReport& r = *it->second;
      if (rows.size() != r.net_load.size()) throw Error(ErrorCode::parse, file + ": slot count mismatch");
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != cols.size()) throw Error(ErrorCode::parse, file + ": ragged row");
        r.original_load[t] = parse_cell(file, rows[t][1]);
        r.net_load[t] = parse_cell(file, rows[t][c]);
      }
    }
  }
  return bundle;
}

std::string format_reduction_table(const std::vector<DayReport>& reports) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%4s %-15s %-12s %14s %14s %10s\n", "day", "scenario", "party", "baseline", "actual",
                "reduction%");
  out << buf;
  for (const auto& r : reports) {
    if (!r.ok()) {
      out << r.day << " " << to_string(r.scenario) << " FAILED: " << r.error << "\n";
      continue;
    }
    for (const auto& p : r.reductions) {
      std::snprintf(buf, sizeof buf, "%4d %-15s %-12s %14.6f %14.6f %10.3f\n", r.day, to_string(r.scenario),
                    p.party.c_str(), p.baseline, p.actual, p.reduction_pct);
      out << buf;
    }
  }
  return out.str();
}

void write_oracle_report(const OracleReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "write_oracle_report: " + dir + " is not a directory");
  const std::size_t n = report.best_division.s_customer.size();
  std::string csv = "point,upper_objective,disco";
  for (std::size_t k = 0; k < n; ++k) csv += ",customer_" + std::to_string(k + 1);
  csv += "\n";
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& rec = report.records[i];
    csv += std::to_string(i + 1) + "," + format_double(rec.upper_objective) + "," + format_double(rec.division.s_disco);
    for (double s : rec.division.s_customer) csv += "," + format_double(s);
    csv += "\n";
  }
  write_text_file((fs::path(dir) / "oracle.csv").string(), csv);
  json j = {{"step", report.step},
            {"points", report.records.size()},
            {"best_upper_objective", report.best_upper_objective},
            {"best_division", {{"disco", report.best_division.s_disco}, {"customers", report.best_division.s_customer}}},
            {"notes", report.notes}};
  write_text_file((fs::path(dir) / "oracle.json").string(), j.dump(2) + "\n");
}

}  // namespace ess
