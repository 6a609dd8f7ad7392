#pragma once

#include <string>
#include <vector>

#include "ess/instance.hpp"
#include "ess/linear_program.hpp"
#include "ess/mpec.hpp"
#include "ess/solver.hpp"

namespace ess {

// Minimizes upper_gradient.x over the optimal face of `lp`, with the original
// objective pinned to its optimum within 1e-9 relative. Throws if the
// returned point breaks the pin or primal feasibility by more than 1e-6.
std::vector<double> optimistic_resolve(const LinearProgram& lp, const std::vector<double>& upper_gradient,
                                       const SolveOptions& options = {});

// Upper-level evaluation of a fixed division with every lower level at an
// optimal response. Ties across the lower levels' optimal faces are broken
// jointly in the upper level's favour (the optimistic bilevel convention).
struct DivisionEvaluation {
  Division division;
  ScheduleSet schedules;
  std::vector<double> lower_objectives;  // customers in order, then DisCo
  double upper_objective = 0.0;
  double unresolved_upper_objective = 0.0;  // first simplex optimum of each lower level, no tie-breaking
};

DivisionEvaluation evaluate_division(const Instance& instance, const Division& division,
                                     const SolveOptions& options = {});

struct OracleRecord {
  Division division;
  std::vector<double> lower_objectives;
  double upper_objective = 0.0;
};

struct OracleReport {
  Division best_division;
  double best_upper_objective = kInf;
  ScheduleSet best_schedules;
  std::vector<OracleRecord> records;  // enumeration order
  std::vector<std::string> notes;     // tie resolutions that moved the upper objective
  double step = 0.0;
};

struct OracleOptions {
  SolveOptions solve;
  long max_points = 200000;  // guard on (grid points)^(N+1)
};

// Exhaustive search over divisions on the grid {0, step, 2 step, ...} with
// sum <= S_total. Ties go to the lexicographically smallest division.
OracleReport grid_oracle(const Instance& instance, double step, const OracleOptions& options = {});

// Number of grid divisions grid_oracle would evaluate.
long grid_point_count(const Instance& instance, double step);

struct KktReport {
  double stationarity = 0.0;      // max |A_g^T w + A_h^T v - c|
  double min_dual = 0.0;          // min w (>= -tol to pass)
  double complementarity = 0.0;   // max |w_i g_i(x)|
  double primal_violation = 0.0;  // max(-g_i, |h_j|)
  bool pass = false;
};

KktReport check_kkt_residuals(const KktSystem& kkt, const std::vector<double>& x, const std::vector<double>& omega,
                              const std::vector<double>& v, double tol);

struct InvariantCheck {
  std::string name;
  double worst = 0.0;  // largest violation found (0 when satisfied)
  bool pass = true;
};

struct InvariantReport {
  std::vector<InvariantCheck> checks;
  bool pass() const;
  const InvariantCheck* find(const std::string& name) const;
};

// Itemized check of the capacity split, SoC corridors, daily energy balance,
// power caps, sign constraints and peak/valley consistency.
InvariantReport check_schedule_invariants(const Instance& instance, const Division& division,
                                          const ScheduleSet& schedules, double tol = 1e-6);

}  // namespace ess
