#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ess/instance.hpp"
#include "ess/linear_program.hpp"
#include "ess/mpec.hpp"
#include "ess/simplex.hpp"

namespace ess {

enum class SolveStatus { optimal, infeasible, unbounded, limit };
enum class BranchingRule { most_fractional, most_violated_complementarity };
enum class SolveMode { bigm, lpcc };

const char* to_string(SolveStatus status);
const char* to_string(SolveMode mode);
// Process exit code: 0 optimal, 2 infeasible, 3 unbounded, 4 limit.
int exit_code(SolveStatus status);

struct SolveOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-7;
  double relative_gap = 0.0;
  long node_limit = 1000000;
  double time_limit = 3600.0;  // seconds
  BranchingRule branching = BranchingRule::most_violated_complementarity;
  bool anti_cycling = true;
  int heuristic_frequency = 10;  // run the primal heuristic every k nodes (0 = root only)
  // Bilevel solves append one secant bound on each lower-level value function.
  bool value_function_rows = true;

  void validate() const;
  SimplexOptions simplex() const;
};

struct SolveResult {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<double> x;
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;
  long nodes = 0;
  long lp_iterations = 0;
  double wall_seconds = 0.0;
  std::vector<double> duals;  // row duals when the model is a plain LP
  std::vector<double> bound_trace;
  std::vector<double> incumbent_trace;

  bool has_incumbent() const { return !x.empty(); }
};

LpSolution solve_lp(const LinearProgram& lp, const SolveOptions& options = {});
SolveResult solve_lp(const MathModel& model, const SolveOptions& options = {});

SolveResult solve_milp(const MilpModel& milp, const SolveOptions& options = {});
SolveResult solve_lpcc(const MpecModel& mpec, const SolveOptions& options = {});

// Generic branch-and-bound over bound changes of columns or row logicals.
struct BoundChange {
  int var = 0;  // column index, or cols + row for a row logical
  double lb = 0.0;
  double ub = 0.0;
};

struct BranchDecision {
  std::vector<BoundChange> first;  // explored first when plunging
  std::vector<BoundChange> second;
  int tag = -1;  // caller's id for the branching object; >= 0 enables observe()
};

struct NodeView {
  const std::vector<double>& cols;
  const std::vector<double>& rows;
  const std::vector<double>& lower;  // current column bounds at the node
  const std::vector<double>& upper;
  double objective;
  long node;
};

struct BranchCallbacks {
  // Returns nothing when the node solution already satisfies every discrete requirement.
  std::function<std::optional<BranchDecision>(const NodeView&)> branch;
  // Repairs a node solution that satisfies the requirements into an exactly
  // feasible point; falls back to the raw node solution when absent.
  std::function<std::optional<std::vector<double>>(const NodeView&)> polish;
  std::function<std::optional<std::vector<double>>(const NodeView&)> heuristic;
  // Branching used when polish fails on a node the main rule accepted.
  std::function<std::optional<BranchDecision>(const NodeView&)> fallback;
  // Child outcome of a tagged decision: objective gain over the parent LP,
  // or +inf when the child is infeasible. `side` 0 is `first`.
  std::function<void(int tag, int side, double gain)> observe;
};

SolveResult branch_and_bound(const MathModel& model, const BranchCallbacks& callbacks, const SolveOptions& options);

// Named view of a bilevel solution vector.
struct DualRecord {
  std::vector<std::vector<double>> omega;  // per block
  std::vector<std::vector<double>> v;
};

struct ExtractedSolution {
  Division division;
  ScheduleSet schedules;
  DualRecord duals;
  double upper_objective = 0.0;
};

// Maps a flat MPEC/MILP vector onto domain quantities and re-verifies every
// upper and lower-level constraint within 1e-6; throws on any breach.
ExtractedSolution extract_solution(const SolveResult& result, const MpecModel& mpec);

// Keeps the primal part and binaries of a big-M solution and re-chooses the
// multipliers with the smallest total, so that M-binding reflects the model
// rather than an arbitrary vertex of a degenerate dual face.
std::vector<double> normalize_duals(const MilpModel& milp, const std::vector<double>& x,
                                    const SolveOptions& options = {});

struct BilevelOutcome {
  SolveResult result;
  ExtractedSolution solution;
  SolveMode mode = SolveMode::lpcc;
  int big_m_rounds = 0;
  double final_dual_m = 0.0;
  bool big_m_clean = true;
  std::vector<std::string> notes;
};

struct BilevelRequest {
  SolveMode mode = SolveMode::lpcc;
  SolveOptions options;
  BigMPolicy big_m;
  std::optional<double> fixed_disco_capacity;
};

// Full pipeline: assemble, (linearize), solve, validate big-M with escalation, extract.
BilevelOutcome solve_bilevel(const Instance& instance, const BilevelRequest& request);

}  // namespace ess
