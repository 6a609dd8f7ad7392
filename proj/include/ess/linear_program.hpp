#pragma once

#include <string>
#include <vector>

#include "ess/instance.hpp"
#include "ess/model.hpp"

namespace ess {

enum class VarRole { charge, discharge, peak, valley };

struct LpVariable {
  std::string name;
  double lower = -kInf;
  double upper = kInf;
  VarRole role = VarRole::charge;
  int slot = -1;
};

// Marks an offset b_i(S) = b_fixed_i + coefficient * S that depends on the
// capacity handed down by the upper level.
struct CapacityMarker {
  bool equality = false;
  int row = 0;
  double coefficient = 0.0;
};

// min c.x  s.t.  g(x) = A_g x - b_g >= 0,  h(x) = A_h x - b_h = 0.
struct LinearProgram {
  std::vector<LpVariable> vars;
  std::vector<double> cost;

  std::vector<SparseRow> g_rows;
  std::vector<double> g_rhs;     // b_g at the stored capacity
  std::vector<int> g_family;     // 1-based function family
  std::vector<int> g_slot;

  std::vector<SparseRow> h_rows;
  std::vector<double> h_rhs;

  double capacity = 0.0;
  std::vector<CapacityMarker> markers;

  int var_count() const { return static_cast<int>(vars.size()); }
  int g_count() const { return static_cast<int>(g_rows.size()); }
  int h_count() const { return static_cast<int>(h_rows.size()); }

  // Offsets with the capacity-dependent part removed.
  std::vector<double> g_rhs_fixed() const;
  std::vector<double> h_rhs_fixed() const;

  // Same program with every marked offset re-evaluated at `new_capacity`.
  LinearProgram at_capacity(double new_capacity) const;

  // g rows become [b, inf) rows and h rows [b, b] rows; variable bounds carry over.
  MathModel to_model() const;
};

enum class LpSolveStatus { optimal, infeasible, unbounded, failed };

struct LpSolution {
  LpSolveStatus status = LpSolveStatus::failed;
  std::vector<double> x;
  std::vector<double> omega;   // one per g row
  std::vector<double> v;       // one per h row
  std::vector<double> bound_duals;  // reduced costs of bounded variables
  double objective = 0.0;
  long iterations = 0;
};

struct LpEvaluation {
  double objective = 0.0;
  double min_g = kInf;  // smallest g-row value (>= 0 when feasible)
  double max_h = 0.0;   // largest |h| residual
};

LinearProgram build_llm_c(const Instance& instance, int n, double capacity);
LinearProgram build_llm_d(const Instance& instance, double capacity);

LpEvaluation evaluate(const LinearProgram& lp, const std::vector<double>& x);

// Index helpers for the lower-level variable layout: charge[0..T), discharge[0..T),
// then peak and valley for customers.
struct LlmLayout {
  int slots = 0;
  int charge(int t) const { return t; }
  int discharge(int t) const { return slots + t; }
  int peak() const { return 2 * slots; }
  int valley() const { return 2 * slots + 1; }
};

}  // namespace ess
