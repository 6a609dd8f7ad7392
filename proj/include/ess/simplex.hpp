#pragma once

#include <cstdint>
#include <vector>

#include "ess/model.hpp"

namespace ess {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

const char* to_string(LpStatus status);

struct SimplexOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-7;
  bool anti_cycling = true;
  int degeneracy_streak = 50;  // consecutive degenerate pivots before Bland's rule
  long max_iterations = 0;     // 0 = automatic
};

// Saved basis: basic variable per row plus the bound each nonbasic sits at.
// Variables are numbered columns first, then one logical per row.
struct Basis {
  std::vector<int> head;
  std::vector<std::int8_t> status;
  bool empty() const { return head.empty(); }
};

// Dense-tableau bounded simplex. Each row gets a logical variable s = a.x so
// that every constraint is a bound; branching is then a bound change on
// either a column or a logical.
class DenseSimplex {
 public:
  DenseSimplex(const MathModel& model, SimplexOptions options = {});

  int cols() const { return n_; }
  int rows() const { return m_; }

  // Cold solve from the slack basis (or the loaded basis, if any).
  LpStatus solve();
  // Re-optimizes after bound changes, using dual simplex when the current
  // basis is dual feasible.
  LpStatus resolve();

  void set_bounds(int var, double lb, double ub);
  double lower(int var) const { return lb_[var]; }
  double upper(int var) const { return ub_[var]; }

  Basis basis() const;
  void load_basis(const Basis& basis);

  LpStatus status() const { return status_; }
  double objective() const;
  std::vector<double> primal() const;         // column values
  std::vector<double> row_activity() const;   // logical values
  std::vector<double> row_duals() const;      // y with c - A^T y = reduced costs
  std::vector<double> reduced_costs() const;  // columns only
  long iterations() const { return iterations_; }
  // True when the current basis can warm-start dual simplex.
  bool dual_feasible() const;

 private:
  enum : std::int8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2, kFreeZero = 3 };

  double& tab(int r, int j) { return tab_[static_cast<std::size_t>(r) * width_ + j]; }
  double tab(int r, int j) const { return tab_[static_cast<std::size_t>(r) * width_ + j]; }

  void reset_to_slack_basis();
  void refactor();
  void place_nonbasic(int j);
  void recompute_basic_values();
  void recompute_reduced_costs();
  void pivot(int r, int j);
  double residual() const;

  LpStatus primal_simplex(bool phase_one);
  LpStatus dual_simplex();
  LpStatus run();
  double infeasibility(int r) const;
  bool certifies_infeasibility(int r) const;

  const MathModel& model_;
  SimplexOptions opt_;
  int n_ = 0, m_ = 0, width_ = 0;
  std::vector<double> tab_;
  std::vector<double> lb_, ub_, cost_, x_, d_;
  std::vector<int> head_, where_;
  std::vector<std::int8_t> state_;
  std::vector<int> nz_;
  LpStatus status_ = LpStatus::numerical_failure;
  long iterations_ = 0;
  long since_refactor_ = 0;
  long max_iterations_ = 0;  // per solve()/resolve() call
  long budget_end_ = 0;
  int farkas_row_ = -1;
};

}  // namespace ess
