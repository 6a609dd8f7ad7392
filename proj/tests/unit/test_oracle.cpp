#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ess/error.hpp"
#include "ess/oracle.hpp"
#include "fixtures.hpp"

using namespace ess;

TEST_SUITE("verifier_oracle") {
  TEST_CASE("zero capacity has one grid point") {
    Instance in = esstest::fixture_instance(2, 4, 3);
    in.storage.total_capacity = 0.0;
    const OracleReport r = grid_oracle(in, 1.0);
    REQUIRE(r.records.size() == 1);
    CHECK(grid_point_count(in, 1.0) == 1);
    CHECK(r.best_upper_objective == doctest::Approx(upper_objective(in, ScheduleSet::idle(in))).epsilon(1e-12));
  }

  TEST_CASE("grid best bounds the bilevel optimum from above") {
    const Instance in = esstest::fixture_instance(1, 4, 4);
    const BilevelOutcome out = solve_bilevel(in, {});
    REQUIRE(out.result.status == SolveStatus::optimal);
    const OracleReport coarse = grid_oracle(in, 2.5);
    const OracleReport fine = grid_oracle(in, 1.25);
    CHECK(fine.best_upper_objective >= out.result.objective - 1e-6);
    CHECK(fine.best_upper_objective <= coarse.best_upper_objective + 1e-12);
    double best = kInf;
    for (const auto& rec : fine.records) best = std::min(best, rec.upper_objective);
    CHECK(best == fine.best_upper_objective);
    CHECK(static_cast<long>(fine.records.size()) == grid_point_count(in, 1.25));
  }

  TEST_CASE("enumeration guard") {
    const Instance in = esstest::fixture_instance(2, 4, 1);
    OracleOptions small;
    small.max_points = 10;
    CHECK_THROWS_AS(grid_oracle(in, 0.5, small), Error);
    CHECK_THROWS_AS(grid_oracle(in, 0.0), Error);
  }

  TEST_CASE("optimistic resolution keeps a unique optimum") {
    Instance in;
    in.grid = {2, 1.0};
    in.customer_count = 1;
    in.storage.total_capacity = 2.0;
    in.storage.eta_ch = in.storage.eta_dis = 1.0;
    in.storage.power_ratio = 1.0;
    in.storage.soc_lower = 0.0;
    in.storage.soc_upper = 1.0;
    in.storage.soc_ini_disco = 0.0;
    in.prices.lmp = {1.0, 3.0};
    in.prices.tou = {0.3, 0.3};
    in.loads.customer_load = {{1.0, 1.0}};
    const LinearProgram lp = build_llm_d(validate_instance(in), 2.0);
    const LpSolution plain = solve_lp(lp);
    const std::vector<double> x = optimistic_resolve(lp, std::vector<double>(lp.var_count(), 1.0));
    for (int j = 0; j < lp.var_count(); ++j) CHECK(x[j] == doctest::Approx(plain.x[j]));
    CHECK_THROWS_AS(optimistic_resolve(lp, {1.0}), Error);
  }

  TEST_CASE("optimistic resolution picks the upper level's favourite optimum") {
    // Flat tariff, lossless, alpha = 0: every energy-neutral cycle is optimal.
    Instance in;
    in.grid = {3, 8.0};
    in.customer_count = 1;
    in.storage.total_capacity = 4.0;
    in.storage.eta_ch = in.storage.eta_dis = 1.0;
    in.weights.alpha = 0.0;
    in.prices.lmp.assign(3, 0.05);
    in.prices.tou.assign(3, 0.3);
    in.loads.customer_load = {{2.0, 2.0, 2.0}};
    const LinearProgram lp = build_llm_c(validate_instance(in), 0, 4.0);
    const LlmLayout L{3};
    std::vector<double> grad(lp.var_count(), 0.0);
    grad[L.charge(1)] = -1.0;
    const std::vector<double> x = optimistic_resolve(lp, grad);
    // Simultaneous charge and discharge is cost-neutral here, so only the power cap binds.
    CHECK(x[L.charge(1)] == doctest::Approx(in.storage.power_ratio * 4.0).epsilon(1e-9));
    CHECK(std::abs(evaluate(lp, x).objective - solve_lp(lp).objective) <= 1e-9);
    grad[L.charge(1)] = 1.0;
    CHECK(std::abs(optimistic_resolve(lp, grad)[L.charge(1)]) <= 1e-9);
  }

  TEST_CASE("KKT residual report") {
    const Instance in = esstest::random_instance(1, 4, 9, 20.0);
    const LinearProgram lp = build_llm_d(in, 6.0);
    const LpSolution sol = solve_lp(lp);
    const KktSystem kkt = derive_kkt(lp);
    REQUIRE(check_kkt_residuals(kkt, sol.x, sol.omega, sol.v, 1e-6).pass);
    for (int i : {0, 5, 11}) {
      std::vector<double> w = sol.omega;
      w[i] += 1.0;
      double norm = 0.0;
      for (double v : lp.g_rows[i].value) norm = std::max(norm, std::abs(v));
      const KktReport r = check_kkt_residuals(kkt, sol.x, w, sol.v, 1e-6);
      CHECK_FALSE(r.pass);
      CHECK(r.stationarity == doctest::Approx(norm).epsilon(1e-6));
    }

    LinearProgram zero;
    zero.vars.push_back({"x"});
    zero.cost = {0.0};
    SparseRow g;
    g.add(0, 1.0);
    zero.g_rows.push_back(g);
    zero.g_rhs.push_back(0.0);
    zero.g_family.push_back(1);
    zero.g_slot.push_back(0);
    CHECK(check_kkt_residuals(derive_kkt(zero), {0.0}, {0.0}, {}, 1e-12).pass);
    CHECK_THROWS_AS(check_kkt_residuals(derive_kkt(zero), {0.0, 1.0}, {0.0}, {}, 1e-6), Error);
  }

  TEST_CASE("schedule invariants") {
    const Instance in = esstest::random_instance(2, 4, 12, 20.0);
    Division d;
    d.s_disco = 4.0;
    d.s_customer = {3.0, 3.0};
    const ScheduleSet idle = ScheduleSet::idle(in);
    CHECK(check_schedule_invariants(in, d, idle).pass());

    ScheduleSet over = idle;
    over.customer_dis[0][1] = in.storage.power_ratio * 3.0 + 1.0;
    over.customer_ch[0][0] = over.customer_dis[0][1];  // keeps SoC balanced in spirit; the cap is what fails
    tighten_peaks(in, over);
    const InvariantReport r = check_schedule_invariants(in, d, over);
    CHECK_FALSE(r.pass());
    REQUIRE(r.find("power_cap"));
    CHECK_FALSE(r.find("power_cap")->pass);
    CHECK(r.find("power_cap")->worst == doctest::Approx(1.0));

    Division too_big = d;
    too_big.s_disco = in.storage.total_capacity;
    CHECK_FALSE(check_schedule_invariants(in, too_big, idle).find("capacity_split")->pass);

    const BilevelOutcome out = solve_bilevel(in, {});
    REQUIRE(out.result.status == SolveStatus::optimal);
    CHECK(check_schedule_invariants(in, out.solution.division, out.solution.schedules).pass());
  }
}
