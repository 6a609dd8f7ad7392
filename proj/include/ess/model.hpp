#pragma once

#include <limits>
#include <string>
#include <vector>

namespace ess {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseRow {
  std::vector<int> index;
  std::vector<double> value;

  void add(int col, double coef) {
    if (coef != 0.0) {
      index.push_back(col);
      value.push_back(coef);
    }
  }
  double dot(const std::vector<double>& x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < index.size(); ++k) s += value[k] * x[index[k]];
    return s;
  }
  std::size_t size() const { return index.size(); }
};

// Flat solver-facing model: min cost.x + offset subject to
// row_lb <= A x <= row_ub and col_lb <= x <= col_ub, optional integrality.
struct MathModel {
  std::vector<std::string> col_names;
  std::vector<double> cost;
  std::vector<double> col_lb, col_ub;
  std::vector<char> integer;
  double offset = 0.0;

  std::vector<std::string> row_names;
  std::vector<SparseRow> rows;
  std::vector<double> row_lb, row_ub;

  int cols() const { return static_cast<int>(cost.size()); }
  int row_count() const { return static_cast<int>(rows.size()); }

  int add_col(std::string name, double lb, double ub, double c = 0.0, bool is_int = false) {
    col_names.push_back(std::move(name));
    cost.push_back(c);
    col_lb.push_back(lb);
    col_ub.push_back(ub);
    integer.push_back(is_int ? 1 : 0);
    return cols() - 1;
  }
  int add_row(std::string name, SparseRow row, double lb, double ub) {
    row_names.push_back(std::move(name));
    rows.push_back(std::move(row));
    row_lb.push_back(lb);
    row_ub.push_back(ub);
    return row_count() - 1;
  }

  double objective(const std::vector<double>& x) const {
    double s = offset;
    for (int j = 0; j < cols(); ++j) s += cost[j] * x[j];
    return s;
  }
  // Largest bound or row violation at x.
  double max_violation(const std::vector<double>& x) const;
};

}  // namespace ess
