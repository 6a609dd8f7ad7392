#include "ess/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace ess {

namespace {

void put_code(char* dst, char prefix, int index) {
  dst[0] = prefix;
  int v = index + 1;
  for (int k = 7; k >= 1; --k) {
    dst[k] = static_cast<char>('0' + v % 10);
    v /= 10;
  }
}

// One fixed-format record; fields start at 1-based columns 2, 5, 15, 25, 40, 50.
class Record {
 public:
  Record() { clear(); }
  void clear() {
    std::fill(buf_, buf_ + sizeof buf_, ' ');
    end_ = 0;
  }
  void field(int start, const char* text, std::size_t len) {
    std::copy(text, text + len, buf_ + start);
    end_ = std::max(end_, start + static_cast<int>(len));
  }
  void field(int start, const std::string& text) { field(start, text.data(), text.size()); }
  void code(int start, char prefix, int index) {
    put_code(buf_ + start, prefix, index);
    end_ = std::max(end_, start + 8);
  }
  void flush(std::string& out) {
    out.append(buf_, static_cast<std::size_t>(end_));
    out += '\n';
    clear();
  }

 private:
  char buf_[64];
  int end_ = 0;
};

constexpr int kF1 = 1, kF2 = 4, kF3 = 14, kF4 = 24, kF5 = 39, kF6 = 49;

struct Entry {
  int row;  // -1 = objective
  double value;
};

void put_target(Record& rec, int start, int row) {
  if (row < 0) rec.field(start, "OBJ", 3);
  else rec.code(start, 'R', row);
}

// Entries two per line under a fixed name in field 2.
template <class Name>
void paired(std::string& out, Name&& name, const std::vector<Entry>& entries) {
  Record rec;
  for (std::size_t k = 0; k < entries.size(); k += 2) {
    name(rec);
    put_target(rec, kF3, entries[k].row);
    rec.field(kF4, mps_number(entries[k].value));
    if (k + 1 < entries.size()) {
      put_target(rec, kF5, entries[k + 1].row);
      rec.field(kF6, mps_number(entries[k + 1].value));
    }
    rec.flush(out);
  }
}

}  // namespace

std::string mps_number(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::invalid_argument, "mps_number: non-finite value");
  if (v == 0.0) return "0";
  char buf[64];
  for (int precision = 12; precision >= 1; --precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::string(buf).size() <= 12) return buf;
  }
  throw Error(ErrorCode::invalid_argument, "mps_number: value does not fit a 12-character field");
}

std::string to_mps(const MathModel& m, const std::string& name) {
  const int n = m.cols();
  const int rows = m.row_count();
  std::string out;
  out.reserve(static_cast<std::size_t>(n + rows) * 64);
  out += "NAME          " + name.substr(0, 8) + "\n";
  out += "ROWS\n";
  Record rec;
  rec.field(kF1, "N", 1);
  rec.field(kF2, "OBJ", 3);
  rec.flush(out);
  std::vector<char> ranged(rows, 0);
  for (int r = 0; r < rows; ++r) {
    const double lo = m.row_lb[r], hi = m.row_ub[r];
    const char* type = "N";
    if (lo == hi) type = "E";
    else if (std::isfinite(lo)) type = "G";
    else if (std::isfinite(hi)) type = "L";
    ranged[r] = std::isfinite(lo) && std::isfinite(hi) && lo != hi;
    rec.field(kF1, type, 1);
    rec.code(kF2, 'R', r);
    rec.flush(out);
  }

  // Column-major view of the rows.
  std::vector<int> start(n + 1, 0);
  for (const auto& row : m.rows)
    for (int j : row.index) ++start[j + 1];
  for (int j = 0; j < n; ++j) start[j + 1] += start[j];
  std::vector<Entry> by_col(start[n]);
  std::vector<int> fill(start.begin(), start.end() - 1);
  for (int r = 0; r < rows; ++r) {
    const auto& row = m.rows[r];
    for (std::size_t k = 0; k < row.size(); ++k) by_col[fill[row.index[k]]++] = {r, row.value[k]};
  }

  out += "COLUMNS\n";
  bool in_int = false;
  int marker = 0;
  auto put_marker = [&](bool open) {
    rec.code(kF2, 'M', marker++);
    rec.field(kF3, "'MARKER'", 8);
    rec.field(kF5, open ? "'INTORG'" : "'INTEND'", 8);
    rec.flush(out);
  };
  std::vector<Entry> entries;
  for (int j = 0; j < n; ++j) {
    const bool is_int = m.integer[j] != 0;
    if (is_int != in_int) {
      put_marker(is_int);
      in_int = is_int;
    }
    entries.clear();
    if (m.cost[j] != 0.0) entries.push_back({-1, m.cost[j]});
    entries.insert(entries.end(), by_col.begin() + start[j], by_col.begin() + start[j + 1]);
    // A column with no entries still needs one line to exist.
    if (entries.empty()) entries.push_back({-1, 0.0});
    paired(out, [j](Record& r) { r.code(kF2, 'C', j); }, entries);
  }
  if (in_int) put_marker(false);

  out += "RHS\n";
  auto rhs_name = [](Record& r) { r.field(kF2, "RHS", 3); };
  entries.clear();
  if (m.offset != 0.0) entries.push_back({-1, -m.offset});
  for (int r = 0; r < rows; ++r) {
    const double lo = m.row_lb[r], hi = m.row_ub[r];
    const double b = std::isfinite(lo) ? lo : std::isfinite(hi) ? hi : 0.0;
    if (b != 0.0) entries.push_back({r, b});
  }
  paired(out, rhs_name, entries);

  entries.clear();
  for (int r = 0; r < rows; ++r)
    if (ranged[r]) entries.push_back({r, m.row_ub[r] - m.row_lb[r]});
  if (!entries.empty()) {
    out += "RANGES\n";
    paired(out, [](Record& r) { r.field(kF2, "RNG", 3); }, entries);
  }

  std::string bounds;
  auto bound = [&](const char* type, int j, const std::string& value) {
    rec.field(kF1, type, 2);
    rec.field(kF2, "BND", 3);
    rec.code(kF3, 'C', j);
    if (!value.empty()) rec.field(kF4, value);
    rec.flush(bounds);
  };
  for (int j = 0; j < n; ++j) {
    const double lo = m.col_lb[j], hi = m.col_ub[j];
    if (m.integer[j] && lo == 0.0 && hi == 1.0) {
      bound("BV", j, "1");
    } else if (lo == hi) {
      bound("FX", j, mps_number(lo));
    } else if (!std::isfinite(lo) && !std::isfinite(hi)) {
      bound("FR", j, {});
    } else {
      if (!std::isfinite(lo)) bound("MI", j, {});
      else if (lo != 0.0 || (std::isfinite(hi) && hi < 0.0) || m.integer[j]) bound("LO", j, mps_number(lo));
      if (std::isfinite(hi)) bound("UP", j, mps_number(hi));
      else if (m.integer[j]) bound("PL", j, {});
    }
  }
  if (!bounds.empty()) {
    out += "BOUNDS\n";
    out += bounds;
  }
  out += "ENDATA\n";
  return out;
}

void export_mps(const MathModel& model, const std::string& path, const std::string& name) {
  const std::string text = to_mps(model, name);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::io, "write failed for " + path);
}

void export_mps(const LinearProgram& lp, const std::string& path, const std::string& name) {
  export_mps(lp.to_model(), path, name);
}

void export_mps(const MilpModel& milp, const std::string& path, const std::string& name) {
  export_mps(milp.model, path, name);
}

}  // namespace ess
