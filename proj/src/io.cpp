#include "ess/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace ess {

namespace {

struct Cell {
  std::string text;
  int column = 0;  // 1-based
};

struct Line {
  std::vector<Cell> cells;
  int number = 0;  // 1-based
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& file, int line, int column, const std::string& msg) {
  std::ostringstream out;
  out << file;
  if (line > 0) out << ":" << line;
  if (line > 0 && column > 0) out << ":" << column;
  out << ": " << msg;
  throw Error(ErrorCode::parse, out.str());
}

// Comma-separated lines; blank lines and `#` comments are skipped.
std::vector<Line> split_csv(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string t = trim(raw);
    if (t.empty() || t[0] == '#') continue;
    Line line{{}, number};
    std::size_t pos = 0;
    int column = 1;
    while (true) {
      const auto comma = raw.find(',', pos);
      line.cells.push_back({trim(raw.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)), column});
      if (comma == std::string::npos) break;
      pos = comma + 1;
      ++column;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> to_long(const std::string& s) {
  long v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

double cell_double(const std::string& file, const Line& line, std::size_t k) {
  const auto v = to_double(line.cells[k].text);
  if (!v) fail(file, line.number, line.cells[k].column, "not a finite number: '" + line.cells[k].text + "'");
  return *v;
}

long cell_slot(const std::string& file, const Line& line, int slots) {
  const auto v = to_long(line.cells[0].text);
  if (!v || *v < 1 || (slots > 0 && *v > slots))
    fail(file, line.number, 1, "slot must be an integer in 1.." + (slots > 0 ? std::to_string(slots) : "T"));
  return *v;
}

void require_header(const std::string& file, const std::vector<Line>& lines, const std::vector<std::string>& want) {
  if (lines.empty()) fail(file, 1, 0, "empty file");
  const Line& h = lines.front();
  std::string expected;
  for (const auto& w : want) expected += (expected.empty() ? "" : ",") + w;
  if (h.cells.size() != want.size()) fail(file, h.number, 0, "header must be '" + expected + "'");
  for (std::size_t k = 0; k < want.size(); ++k)
    if (h.cells[k].text != want[k]) fail(file, h.number, h.cells[k].column, "header must be '" + expected + "'");
}

void require_width(const std::string& file, const Line& line, std::size_t width) {
  if (line.cells.size() != width)
    fail(file, line.number, 0, "expected " + std::to_string(width) + " fields, got " + std::to_string(line.cells.size()));
}

Series parse_list(const std::string& file, int line, const std::string& value) {
  Series out;
  std::size_t pos = 0;
  int column = 1;
  while (true) {
    const auto comma = value.find(',', pos);
    const std::string item = trim(value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    const auto v = to_double(item);
    if (!v) fail(file, line, 0, "list item " + std::to_string(column) + " is not a finite number: '" + item + "'");
    out.push_back(*v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
    ++column;
  }
  return out;
}

bool parse_bool(const std::string& file, int line, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(file, line, 0, "expected true or false, got '" + v + "'");
}

std::string join(const Series& s) {
  std::string out;
  for (double v : s) out += (out.empty() ? "" : ",") + format_double(v);
  return out;
}

// Field accessors shared by the reader and the writer, so the two cannot drift.
struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string& value, const std::string& file, int line)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Field number(const std::string& key, Get get) {
  return {key,
          [key, get](RunConfig& c, const std::string& v, const std::string& f, int l) {
            const auto d = to_double(v);
            if (!d) fail(f, l, 0, key + ": not a finite number: '" + v + "'");
            get(c) = *d;
          },
          [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field integer(const std::string& key, Get get) {
  return {key,
          [key, get](RunConfig& c, const std::string& v, const std::string& f, int l) {
            const auto d = to_long(v);
            if (!d) fail(f, l, 0, key + ": not an integer: '" + v + "'");
            get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(*d);
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field boolean(const std::string& key, Get get) {
  return {key, [get](RunConfig& c, const std::string& v, const std::string& f, int l) { get(c) = parse_bool(f, l, v); },
          [get](const RunConfig& c) { return std::string(get(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(integer("slot_count", [](RunConfig& c) -> int& { return c.instance.grid.slot_count; }));
    f.push_back(number("slot_hours", [](RunConfig& c) -> double& { return c.instance.grid.slot_hours; }));
    f.push_back(number("total_capacity", [](RunConfig& c) -> double& { return c.instance.storage.total_capacity; }));
    f.push_back(number("eta_ch", [](RunConfig& c) -> double& { return c.instance.storage.eta_ch; }));
    f.push_back(number("eta_dis", [](RunConfig& c) -> double& { return c.instance.storage.eta_dis; }));
    f.push_back(number("power_ratio", [](RunConfig& c) -> double& { return c.instance.storage.power_ratio; }));
    f.push_back(number("soc_lower", [](RunConfig& c) -> double& { return c.instance.storage.soc_lower; }));
    f.push_back(number("soc_upper", [](RunConfig& c) -> double& { return c.instance.storage.soc_upper; }));
    f.push_back({"soc_ini_customer",
                 [](RunConfig& c, const std::string& v, const std::string& file, int l) {
                   c.instance.storage.soc_ini_customer = parse_list(file, l, v);
                 },
                 [](const RunConfig& c) { return join(c.instance.storage.soc_ini_customer); }});
    f.push_back(number("soc_ini_disco", [](RunConfig& c) -> double& { return c.instance.storage.soc_ini_disco; }));
    f.push_back(number("lambda1", [](RunConfig& c) -> double& { return c.instance.weights.lambda1; }));
    f.push_back(number("lambda2", [](RunConfig& c) -> double& { return c.instance.weights.lambda2; }));
    f.push_back(number("lambda3", [](RunConfig& c) -> double& { return c.instance.weights.lambda3; }));
    f.push_back(number("alpha", [](RunConfig& c) -> double& { return c.instance.weights.alpha; }));
    f.push_back({"extra_base_load",
                 [](RunConfig& c, const std::string& v, const std::string& file, int l) {
                   c.instance.loads.extra_base_load = parse_list(file, l, v);
                 },
                 [](const RunConfig& c) { return join(c.instance.loads.extra_base_load); }});
    f.push_back({"mode",
                 [](RunConfig& c, const std::string& v, const std::string& file, int l) {
                   if (v == "bigm") c.request.mode = SolveMode::bigm;
                   else if (v == "lpcc") c.request.mode = SolveMode::lpcc;
                   else fail(file, l, 0, "mode must be bigm or lpcc, got '" + v + "'");
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.request.mode)); }});
    f.push_back(number("time_limit", [](RunConfig& c) -> double& { return c.request.options.time_limit; }));
    f.push_back(integer("node_limit", [](RunConfig& c) -> long& { return c.request.options.node_limit; }));
    f.push_back(number("relative_gap", [](RunConfig& c) -> double& { return c.request.options.relative_gap; }));
    f.push_back(number("feasibility_tol", [](RunConfig& c) -> double& { return c.request.options.feasibility_tol; }));
    f.push_back(number("optimality_tol", [](RunConfig& c) -> double& { return c.request.options.optimality_tol; }));
    f.push_back({"branching",
                 [](RunConfig& c, const std::string& v, const std::string& file, int l) {
                   if (v == "most_fractional") c.request.options.branching = BranchingRule::most_fractional;
                   else if (v == "most_violated_complementarity")
                     c.request.options.branching = BranchingRule::most_violated_complementarity;
                   else fail(file, l, 0, "branching must be most_fractional or most_violated_complementarity");
                 },
                 [](const RunConfig& c) {
                   return std::string(c.request.options.branching == BranchingRule::most_fractional
                                          ? "most_fractional"
                                          : "most_violated_complementarity");
                 }});
    f.push_back(boolean("anti_cycling", [](RunConfig& c) -> bool& { return c.request.options.anti_cycling; }));
    f.push_back(integer("heuristic_frequency", [](RunConfig& c) -> int& { return c.request.options.heuristic_frequency; }));
    f.push_back(boolean("value_function_rows", [](RunConfig& c) -> bool& { return c.request.options.value_function_rows; }));
    f.push_back(number("grid_step", [](RunConfig& c) -> double& { return c.grid_step; }));
    f.push_back(boolean("bigm_primal_from_bounds", [](RunConfig& c) -> bool& { return c.request.big_m.primal_from_bounds; }));
    f.push_back(number("bigm_dual_default", [](RunConfig& c) -> double& { return c.request.big_m.dual_default; }));
    f.push_back(number("bigm_primal_default", [](RunConfig& c) -> double& { return c.request.big_m.primal_default; }));
    f.push_back(number("bigm_escalation_factor", [](RunConfig& c) -> double& { return c.request.big_m.escalation_factor; }));
    f.push_back(integer("bigm_max_rounds", [](RunConfig& c) -> int& { return c.request.big_m.max_rounds; }));
    return f;
  }();
  return all;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::invalid_argument, "format_double failed");
  return std::string(buf, ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  f << text;
  f.close();
  if (!f) throw Error(ErrorCode::io, "write failed for " + path);
}

RunConfig parse_inputs(const std::string& loads_text, const std::string& loads_name, const std::string& prices_text,
                       const std::string& prices_name, const std::string& config_text,
                       const std::string& config_name) {
  RunConfig cfg;
  std::map<std::string, int> seen;  // key -> line

  {
    std::istringstream in(config_text);
    std::string raw;
    int number = 0;
    std::unordered_map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key[f.key] = &f;
    while (std::getline(in, raw)) {
      ++number;
      const std::string t = trim(raw.substr(0, raw.find('#')));
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) fail(config_name, number, 0, "expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      const auto it = by_key.find(key);
      if (it == by_key.end()) fail(config_name, number, 0, "unknown key '" + key + "'");
      if (seen.count(key)) fail(config_name, number, 0, "duplicate key '" + key + "'");
      if (value.empty()) fail(config_name, number, 0, "empty value for '" + key + "'");
      it->second->set(cfg, value, config_name, number);
      seen[key] = number;
    }
  }

  const auto prices = split_csv(prices_text);
  require_header(prices_name, prices, {"t", "lmp_per_kwh", "tou_per_kwh"});
  const int price_rows = static_cast<int>(prices.size()) - 1;
  int T = cfg.instance.grid.slot_count;
  if (!seen.count("slot_count")) {
    if (price_rows < 2) fail(prices_name, 1, 0, "need at least 2 price rows to infer slot_count");
    T = cfg.instance.grid.slot_count = price_rows;
    cfg.provenance.push_back("slot_count = " + std::to_string(T) + " taken from the prices file row count");
  } else if (price_rows != T) {
    fail(prices_name, prices.back().number, 0,
         "expected " + std::to_string(T) + " price rows (slot_count), found " + std::to_string(price_rows));
  }
  if (T < 1) fail(config_name, seen["slot_count"], 0, "slot_count must be positive");
  if (!seen.count("slot_hours")) {
    cfg.instance.grid.slot_hours = 24.0 / T;
    cfg.provenance.push_back("slot_hours = " + format_double(24.0 / T) + " (one day over slot_count slots)");
  }

  auto& pr = cfg.instance.prices;
  pr.lmp.assign(T, 0.0);
  pr.tou.assign(T, 0.0);
  std::vector<char> have_price(T, 0);
  for (std::size_t k = 1; k < prices.size(); ++k) {
    const Line& line = prices[k];
    require_width(prices_name, line, 3);
    const long t = cell_slot(prices_name, line, T);
    if (have_price[t - 1]) fail(prices_name, line.number, 1, "duplicate slot " + std::to_string(t));
    have_price[t - 1] = 1;
    pr.lmp[t - 1] = cell_double(prices_name, line, 1);
    pr.tou[t - 1] = cell_double(prices_name, line, 2);
    if (pr.tou[t - 1] < 0.0) fail(prices_name, line.number, 3, "tou_per_kwh must be nonnegative");
  }

  const auto loads = split_csv(loads_text);
  require_header(loads_name, loads, {"t", "customer_id", "load_kw"});
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<char>> have;
  Matrix& load = cfg.instance.loads.customer_load;
  for (std::size_t k = 1; k < loads.size(); ++k) {
    const Line& line = loads[k];
    require_width(loads_name, line, 3);
    const long t = cell_slot(loads_name, line, T);
    const std::string& id = line.cells[1].text;
    if (id.empty()) fail(loads_name, line.number, 2, "empty customer_id");
    auto [it, fresh] = index.emplace(id, static_cast<int>(ids.size()));
    if (fresh) {
      ids.push_back(id);
      load.push_back(Series(T, 0.0));
      have.push_back(std::vector<char>(T, 0));
    }
    const int n = it->second;
    if (have[n][t - 1]) fail(loads_name, line.number, 0, "duplicate row for customer '" + id + "' slot " + std::to_string(t));
    have[n][t - 1] = 1;
    const double v = cell_double(loads_name, line, 2);
    if (v < 0.0) fail(loads_name, line.number, 3, "load_kw must be nonnegative");
    load[n][t - 1] = v;
  }
  if (ids.empty()) fail(loads_name, 1, 0, "no load rows");
  for (std::size_t n = 0; n < ids.size(); ++n)
    for (int t = 0; t < T; ++t)
      if (!have[n][t])
        fail(loads_name, 0, 0, "customer '" + ids[n] + "' has no row for slot " + std::to_string(t + 1));
  cfg.instance.customer_count = static_cast<int>(ids.size());
  const int N = cfg.instance.customer_count;

  auto& soc = cfg.instance.storage.soc_ini_customer;
  if (seen.count("soc_ini_customer") && soc.size() == 1 && N > 1) soc.assign(N, soc.front());
  if (seen.count("soc_ini_customer") && static_cast<int>(soc.size()) != N)
    fail(config_name, seen["soc_ini_customer"], 0,
         "soc_ini_customer: expected 1 or " + std::to_string(N) + " values, got " + std::to_string(soc.size()));
  if (seen.count("extra_base_load") && static_cast<int>(cfg.instance.loads.extra_base_load.size()) != T)
    fail(config_name, seen["extra_base_load"], 0, "extra_base_load: expected " + std::to_string(T) + " values");

  // Record every default before validation fills the derived ones.
  const RunConfig defaults;
  for (const auto& f : fields()) {
    if (seen.count(f.key) || f.key == "slot_count" || f.key == "slot_hours") continue;
    if (f.key == "soc_ini_customer") {
      cfg.provenance.push_back("soc_ini_customer = 0.5 for every customer (default)");
    } else if (f.key == "extra_base_load") {
      cfg.provenance.push_back("extra_base_load = 0 in every slot (default)");
    } else if (f.key == "grid_step") {
      cfg.provenance.push_back("grid_step = total_capacity / 20 (default)");
    } else {
      cfg.provenance.push_back(f.key + " = " + f.get(defaults) + " (default)");
    }
  }

  try {
    cfg.instance = validate_instance(std::move(cfg.instance));
    cfg.request.options.validate();
  } catch (const Error& e) {
    throw Error(e.code(), config_name + ": " + e.what());
  }
  return cfg;
}

RunConfig load_inputs(const std::string& loads_path, const std::string& prices_path, const std::string& config_path) {
  return parse_inputs(read_text_file(loads_path), loads_path, read_text_file(prices_path), prices_path,
                      config_path.empty() ? std::string() : read_text_file(config_path),
                      config_path.empty() ? std::string("<defaults>") : config_path);
}

std::string format_loads(const Instance& in) {
  std::string out = "t,customer_id,load_kw\n";
  for (int t = 0; t < in.slots(); ++t)
    for (int n = 0; n < in.customers(); ++n)
      out += std::to_string(t + 1) + "," + std::to_string(n + 1) + "," + format_double(in.loads.customer_load[n][t]) + "\n";
  return out;
}

std::string format_prices(const Instance& in) {
  std::string out = "t,lmp_per_kwh,tou_per_kwh\n";
  for (int t = 0; t < in.slots(); ++t)
    out += std::to_string(t + 1) + "," + format_double(in.prices.lmp[t]) + "," + format_double(in.prices.tou[t]) + "\n";
  return out;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string v = f.get(cfg);
    if (!v.empty()) out += f.key + " = " + v + "\n";
  }
  return out;
}

void write_inputs(const RunConfig& cfg, const std::string& loads_path, const std::string& prices_path,
                  const std::string& config_path) {
  write_text_file(loads_path, format_loads(cfg.instance));
  write_text_file(prices_path, format_prices(cfg.instance));
  write_text_file(config_path, format_config(cfg));
}

}  // namespace ess
