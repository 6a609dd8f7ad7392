#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ess/instance.hpp"
#include "ess/linear_program.hpp"
#include "ess/model.hpp"

namespace ess {

// KKT conditions of min c.x s.t. A_g x - b_g >= 0, A_h x - b_h = 0:
//   stationarity  A_g^T w + A_h^T v = c   (one row per primal variable)
//   complementarity  w_i * g_i(x) = 0,  w >= 0,  plus the primal rows.
// Finite variable bounds are moved into extra g rows first, so every
// inequality carries exactly one multiplier.
struct KktSystem {
  LinearProgram primal;                 // primal rows, all variables free
  std::vector<SparseRow> stationarity;  // over the dual vector [w | v]
  std::vector<double> stationarity_rhs; // c_j

  int omega_count() const { return primal.g_count(); }
  int v_count() const { return primal.h_count(); }
  int pair_count() const { return primal.g_count(); }
};

KktSystem derive_kkt(const LinearProgram& lp);

enum class BlockKind { customer, disco };

// One embedded lower-level problem and where its pieces live in the model.
struct LowerBlock {
  BlockKind kind = BlockKind::customer;
  int customer = -1;
  KktSystem kkt;
  int capacity_col = -1;
  int x_begin = 0, omega_begin = 0, v_begin = 0;
  int g_row_begin = 0, h_row_begin = 0, stationarity_row_begin = 0;
};

struct ComplementarityPair {
  int dual_col = 0;
  int g_row = 0;  // row of the model; g value = activity - row_lb
  int block = 0;
  int family = 0;
  int slot = -1;
};

struct MpecModel {
  Instance instance;
  MathModel model;  // every row except the complementarity conditions
  int peak_col = 0;
  int disco_capacity_col = 0;
  std::vector<int> customer_capacity_cols;
  int capacity_row = 0;
  int peak_row_begin = 0;
  std::vector<LowerBlock> blocks;  // customers in order, then DisCo
  std::vector<ComplementarityPair> pairs;

  const LowerBlock& disco_block() const { return blocks.back(); }
  // Pins a division entry (column bounds) to a value.
  void fix_capacity(int capacity_col, double value);
};

MpecModel assemble_mpec(const Instance& instance);

struct BigMPolicy {
  bool primal_from_bounds = true;
  double dual_default = 0.0;  // 0 selects 1000 * max(|lmp|, tou, alpha) * dt
  double primal_default = 1e4;
  double escalation_factor = 10.0;
  int max_rounds = 3;
};

double default_dual_big_m(const Instance& instance);

struct BigMRecord {
  double dual_m = 0.0;
  double primal_m = 0.0;
  bool primal_exact = false;  // primal_m is an implied bound, never truncating
};

struct MilpModel {
  MathModel model;
  std::shared_ptr<const MpecModel> source;  // null for hand-built MILPs
  std::vector<int> pair_binary;             // binary column per source pair
  std::vector<int> dual_row, primal_row;    // linearization rows per pair
  std::vector<BigMRecord> big_m;
  std::vector<std::string> warnings;

  int binary_count() const;
};

MilpModel linearize_big_m(std::shared_ptr<const MpecModel> mpec, const BigMPolicy& policy);
inline MilpModel linearize_big_m(const MpecModel& mpec, const BigMPolicy& policy) {
  return linearize_big_m(std::make_shared<const MpecModel>(mpec), policy);
}

struct BigMBinding {
  int pair = 0;
  bool dual_side = true;
  double value = 0.0;
  double bound = 0.0;
};

struct BigMReport {
  std::vector<BigMBinding> binding;
  bool clean() const { return binding.empty(); }
};

// Pairs whose multiplier (or a non-implied primal slack) lies within tol*M of
// its big-M bound. An empty report certifies that the constants did not cut
// off the solution.
BigMReport validate_big_m(const MilpModel& milp, const std::vector<double>& solution, double tol = 1e-3);

// g value of a complementarity pair at x (columns) for the MPEC model.
double pair_slack(const MpecModel& mpec, const ComplementarityPair& pair, const std::vector<double>& x);

}  // namespace ess
