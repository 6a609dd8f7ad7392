#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ess/mpec.hpp"
#include "ess/oracle.hpp"
#include "ess/solver.hpp"
#include "fixtures.hpp"

using namespace ess;

namespace {

// Semantics of one linearized pair, written out independently.
bool pair_feasible(double a, double b, double m) {
  for (int u = 0; u <= 1; ++u)
    if (a >= 0.0 && a <= m * u && b >= 0.0 && b <= m * (1 - u)) return true;
  return false;
}

}  // namespace

TEST_SUITE("mpec_builder") {
  TEST_CASE("one-variable KKT") {
    LinearProgram lp;
    lp.vars.push_back({"x"});
    lp.cost = {2.5};
    SparseRow g;
    g.add(0, 1.0);
    lp.g_rows.push_back(g);
    lp.g_rhs.push_back(0.0);
    lp.g_family.push_back(1);
    lp.g_slot.push_back(0);
    const KktSystem kkt = derive_kkt(lp);
    CHECK(kkt.pair_count() == 1);
    REQUIRE(kkt.stationarity.size() == 1);
    CHECK(kkt.stationarity[0].index == std::vector<int>{0});
    CHECK(kkt.stationarity[0].value == std::vector<double>{1.0});
    CHECK(kkt.stationarity_rhs[0] == 2.5);
    CHECK(check_kkt_residuals(kkt, {0.0}, {2.5}, {}, 1e-12).pass);
  }

  TEST_CASE("peak stationarity of the customer program") {
    const Instance in = esstest::random_instance(1, 5, 3, 20.0);
    const LinearProgram lp = build_llm_c(in, 0, 4.0);
    const KktSystem kkt = derive_kkt(lp);
    const LlmLayout L{5};
    const SparseRow& row = kkt.stationarity[L.peak()];
    CHECK(kkt.stationarity_rhs[L.peak()] == doctest::Approx(in.weights.alpha));
    REQUIRE(row.size() == 5);
    for (std::size_t k = 0; k < row.size(); ++k) {
      CHECK(lp.g_family[row.index[k]] == 7);
      CHECK(row.value[k] == 1.0);
    }
  }

  TEST_CASE("simplex optima satisfy the derived systems") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const Instance in = esstest::random_instance(1, 6, seed, 20.0);
      for (const LinearProgram& lp : {build_llm_c(in, 0, 7.0), build_llm_d(in, 7.0)}) {
        const LpSolution sol = solve_lp(lp);
        REQUIRE(sol.status == LpSolveStatus::optimal);
        const KktReport r = check_kkt_residuals(derive_kkt(lp), sol.x, sol.omega, sol.v, 1e-6);
        CHECK(r.pass);
      }
    }
  }

  TEST_CASE("MPEC dimensions") {
    const Instance in = esstest::random_instance(1, 4, 1, 20.0);
    const MpecModel m = assemble_mpec(in);
    CHECK(m.model.cols() == 1 + 2 + (2 * 4 + 2) + 8 * 4 + 1 + 2 * 4 + 6 * 4 + 1);
    CHECK(m.pairs.size() == 8 * 4 + 6 * 4);
    CHECK(m.blocks.size() == 2);
    int peak_rows = 0, capacity_rows = 0;
    for (const auto& name : m.model.row_names) {
      peak_rows += name.rfind("peak_", 0) == 0;
      capacity_rows += name == "capacity";
    }
    CHECK(peak_rows == 4);
    CHECK(capacity_rows == 1);

    // Every column belongs to exactly one owner.
    std::vector<int> owner(m.model.cols(), 0);
    ++owner[m.peak_col];
    ++owner[m.disco_capacity_col];
    for (int c : m.customer_capacity_cols) ++owner[c];
    for (const auto& b : m.blocks) {
      for (int j = 0; j < b.kkt.primal.var_count(); ++j) ++owner[b.x_begin + j];
      for (int j = 0; j < b.kkt.omega_count(); ++j) ++owner[b.omega_begin + j];
      for (int j = 0; j < b.kkt.v_count(); ++j) ++owner[b.v_begin + j];
    }
    CHECK(std::all_of(owner.begin(), owner.end(), [](int k) { return k == 1; }));
  }

  TEST_CASE("full-scale pair count") {
    Instance in;
    in.grid = {48, 0.5};
    in.customer_count = 100;
    in.storage.total_capacity = 800.0;
    in.prices.lmp.assign(48, 0.05);
    in.prices.tou.assign(48, 0.3);
    in.loads.customer_load.assign(100, Series(48, 1.0));
    const MpecModel m = assemble_mpec(validate_instance(in));
    CHECK(m.pairs.size() == 38688);
  }

  TEST_CASE("peak-only weights") {
    Instance in = esstest::random_instance(2, 4, 2, 20.0);
    in.weights.lambda2 = in.weights.lambda3 = 0.0;
    const MpecModel m = assemble_mpec(in);
    for (int j = 0; j < m.model.cols(); ++j) {
      if (j == m.peak_col) CHECK(m.model.cost[j] == doctest::Approx(in.weights.lambda1));
      else CHECK(m.model.cost[j] == 0.0);
    }
    CHECK(m.model.offset == 0.0);
  }

  TEST_CASE("linearized pair semantics") {
    CHECK(pair_feasible(0.0, 7.0, 10.0));
    CHECK_FALSE(pair_feasible(3.0, 2.0, 10.0));
    CHECK_FALSE(pair_feasible(12.0, 0.0, 10.0));

    const Instance in = esstest::random_instance(1, 4, 4, 20.0);
    BigMPolicy policy;
    policy.dual_default = 10.0;
    const MilpModel milp = linearize_big_m(assemble_mpec(in), policy);
    REQUIRE(milp.source);
    CHECK(milp.binary_count() == static_cast<int>(milp.source->pairs.size()));
    for (std::size_t p = 0; p < milp.source->pairs.size(); ++p) {
      const SparseRow& dual = milp.model.rows[milp.dual_row[p]];
      REQUIRE(dual.size() == 2);
      const int bin = milp.pair_binary[p];
      const int col = milp.source->pairs[p].dual_col;
      for (std::size_t k = 0; k < 2; ++k) {
        if (dual.index[k] == col) CHECK(dual.value[k] == 1.0);
        else CHECK((dual.index[k] == bin && dual.value[k] == -milp.big_m[p].dual_m));
      }
      CHECK(milp.model.row_ub[milp.dual_row[p]] == 0.0);
      CHECK(milp.big_m[p].dual_m == 10.0);
      CHECK(milp.big_m[p].primal_m > 0.0);
      CHECK(std::isfinite(milp.big_m[p].primal_m));
      CHECK(milp.model.integer[bin] == 1);
    }
  }

  TEST_CASE("big-M validation flags multipliers at the bound") {
    const Instance in = esstest::fixture_instance(1, 4, 2);
    BilevelRequest req;
    req.mode = SolveMode::bigm;
    const BilevelOutcome out = solve_bilevel(in, req);
    REQUIRE(out.result.status == SolveStatus::optimal);
    CHECK(out.big_m_clean);

    const auto mpec = std::make_shared<const MpecModel>(assemble_mpec(in));
    const MilpModel milp = linearize_big_m(mpec, req.big_m);
    std::vector<double> x(milp.model.cols(), 0.0);
    std::copy(out.result.x.begin(), out.result.x.begin() + mpec->model.cols(), x.begin());
    for (const auto& pair : mpec->pairs) x[pair.dual_col] = 0.0;
    CHECK(validate_big_m(milp, x).clean());
    x[mpec->pairs[0].dual_col] = milp.big_m[0].dual_m;
    const BigMReport flagged = validate_big_m(milp, x);
    REQUIRE_FALSE(flagged.clean());
    CHECK(flagged.binding[0].pair == 0);
    CHECK(flagged.binding[0].dual_side);
  }

  TEST_CASE("escalating M leaves the optimum unchanged") {
    const Instance in = esstest::fixture_instance(1, 4, 3);
    BilevelRequest req;
    req.mode = SolveMode::bigm;
    const BilevelOutcome base = solve_bilevel(in, req);
    req.big_m.dual_default = 10.0 * default_dual_big_m(in);
    const BilevelOutcome big = solve_bilevel(in, req);
    REQUIRE(base.result.status == SolveStatus::optimal);
    REQUIRE(big.result.status == SolveStatus::optimal);
    CHECK(std::abs(big.result.objective - base.result.objective) <= 1e-6 * std::max(1.0, std::abs(base.result.objective)));
    CHECK(big.big_m_clean);
  }
}
