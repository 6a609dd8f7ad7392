#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ess/error.hpp"
#include "ess/linear_program.hpp"
#include "ess/solver.hpp"
#include "fixtures.hpp"

using namespace ess;

namespace {

Instance small_instance(int T, double dt) {
  Instance in;
  in.grid = {T, dt};
  in.customer_count = 1;
  in.storage.total_capacity = 10.0;
  in.prices.lmp.assign(T, 0.05);
  in.prices.tou.assign(T, 0.3);
  in.loads.customer_load.assign(1, Series(T, 2.0));
  return in;
}

ScheduleSet customer_schedule(const Instance& in, const LinearProgram& lp, const std::vector<double>& x) {
  ScheduleSet s = ScheduleSet::idle(in);
  const LlmLayout L{in.slots()};
  for (int t = 0; t < in.slots(); ++t) {
    s.customer_ch[0][t] = x[L.charge(t)];
    s.customer_dis[0][t] = x[L.discharge(t)];
  }
  s.customer_peak[0] = x[L.peak()];
  s.customer_valley[0] = x[L.valley()];
  (void)lp;
  return s;
}

}  // namespace

TEST_SUITE("lp_core") {
  TEST_CASE("customer program shape") {
    const Instance in = esstest::random_instance(2, 6, 1, 20.0);
    const LinearProgram lp = build_llm_c(in, 1, 5.0);
    CHECK(lp.var_count() == 2 * 6 + 2);
    CHECK(lp.g_count() == 8 * 6);
    CHECK(lp.h_count() == 1);
    for (int f = 1; f <= 8; ++f) CHECK(std::count(lp.g_family.begin(), lp.g_family.end(), f) == 6);
    for (const auto& v : lp.vars) {
      CHECK_FALSE(std::isfinite(v.lower));
      CHECK_FALSE(std::isfinite(v.upper));
    }
    for (const auto& row : lp.g_rows)
      for (double v : row.value) CHECK(v != 0.0);
    CHECK_THROWS_AS(build_llm_c(in, 0, -1.0), Error);
  }

  TEST_CASE("capacity markers touch only SoC and power offsets") {
    const Instance in = esstest::random_instance(1, 4, 2, 20.0);
    for (const LinearProgram& lp : {build_llm_c(in, 0, 3.0), build_llm_d(in, 3.0)}) {
      CHECK_FALSE(lp.markers.empty());
      for (const auto& m : lp.markers) {
        if (m.equality) continue;
        const int f = lp.g_family[m.row];
        CHECK((f == 1 || f == 2 || f == 5 || f == 6));
      }
      // Re-evaluating at another capacity moves only offsets.
      const LinearProgram other = lp.at_capacity(7.0);
      for (int i = 0; i < lp.g_count(); ++i) {
        CHECK(other.g_rows[i].index == lp.g_rows[i].index);
        CHECK(other.g_rows[i].value == lp.g_rows[i].value);
      }
    }
  }

  TEST_CASE("zero capacity pins the customer schedule") {
    Instance raw = small_instance(4, 6.0);
    raw.loads.customer_load[0] = {1.0, 3.0, 2.0, 5.0};
    const Instance in = validate_instance(raw);
    const LinearProgram lp = build_llm_c(in, 0, 0.0);
    const LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpSolveStatus::optimal);
    const LlmLayout L{4};
    for (int t = 0; t < 4; ++t) {
      CHECK(std::abs(sol.x[L.charge(t)]) <= 1e-9);
      CHECK(std::abs(sol.x[L.discharge(t)]) <= 1e-9);
    }
    CHECK(sol.x[L.peak()] == doctest::Approx(5.0));
    CHECK(sol.x[L.valley()] == doctest::Approx(1.0));
    CHECK(sol.objective == doctest::Approx(in.weights.alpha * 4.0));
  }

  TEST_CASE("customer program optimum on the hand-checked instance") {
    Instance in = small_instance(4, 1.0);
    in.storage.total_capacity = 4.0;
    in.storage.eta_ch = in.storage.eta_dis = 1.0;
    in.storage.power_ratio = 1.0;
    in.storage.soc_lower = 0.0;
    in.storage.soc_upper = 1.0;
    in.storage.soc_ini_customer = {0.0};
    in.prices.tou = {1.0, 1.0, 2.0, 2.0};
    in.loads.customer_load[0] = {4.0, 4.0, 4.0, 4.0};
    const Instance v = validate_instance(in);
    const LpSolution sol = solve_lp(build_llm_c(v, 0, 4.0));
    REQUIRE(sol.status == LpSolveStatus::optimal);
    CHECK(sol.objective == doctest::Approx(-3.96).epsilon(1e-12));
  }

  TEST_CASE("DisCo program shape and zero capacity") {
    const Instance in = esstest::random_instance(2, 5, 3, 20.0);
    const LinearProgram lp = build_llm_d(in, 4.0);
    CHECK(lp.var_count() == 10);
    CHECK(lp.g_count() == 30);
    CHECK(lp.h_count() == 1);
    CHECK_THROWS_AS(build_llm_d(in, -0.5), Error);
    const LpSolution z = solve_lp(build_llm_d(in, 0.0));
    REQUIRE(z.status == LpSolveStatus::optimal);
    CHECK(std::abs(z.objective) <= 1e-12);
    for (double x : z.x) CHECK(std::abs(x) <= 1e-9);
  }

  TEST_CASE("flat LMP with losses leaves DisCo idle") {
    Instance in = small_instance(6, 4.0);
    in.storage.eta_ch = in.storage.eta_dis = 0.9;
    const LpSolution sol = solve_lp(build_llm_d(validate_instance(in), 10.0));
    REQUIRE(sol.status == LpSolveStatus::optimal);
    CHECK(std::abs(sol.objective) <= 1e-12);
    for (double x : sol.x) CHECK(std::abs(x) <= 1e-9);
  }

  TEST_CASE("two-slot arbitrage") {
    Instance in = small_instance(2, 1.0);
    in.storage.eta_ch = in.storage.eta_dis = 1.0;
    in.storage.power_ratio = 1.0;
    in.storage.soc_lower = 0.0;
    in.storage.soc_upper = 1.0;
    in.storage.soc_ini_disco = 0.0;
    in.prices.lmp = {1.0, 3.0};
    const LpSolution sol = solve_lp(build_llm_d(validate_instance(in), 2.0));
    REQUIRE(sol.status == LpSolveStatus::optimal);
    CHECK(sol.objective == doctest::Approx(-4.0).epsilon(1e-12));
    const LlmLayout L{2};
    CHECK(sol.x[L.charge(0)] == doctest::Approx(2.0));
    CHECK(sol.x[L.discharge(1)] == doctest::Approx(2.0));
  }

  TEST_CASE("evaluate against a dense recomputation") {
    const Instance in = esstest::random_instance(1, 4, 5, 20.0);
    const LinearProgram d = build_llm_d(in, 6.0);
    const LpEvaluation zero = evaluate(d, std::vector<double>(d.var_count(), 0.0));
    CHECK(zero.objective == 0.0);
    double min_neg_b = kInf;
    for (double b : d.g_rhs) min_neg_b = std::min(min_neg_b, -b);
    CHECK(zero.min_g == doctest::Approx(min_neg_b));
    CHECK_THROWS_AS(evaluate(d, std::vector<double>(3, 0.0)), Error);

    esstest::Rng rng(17);
    const LinearProgram c = build_llm_c(in, 0, 6.0);
    const int n = c.var_count();
    std::vector<std::vector<double>> dense(c.g_count(), std::vector<double>(n, 0.0));
    for (int i = 0; i < c.g_count(); ++i)
      for (std::size_t k = 0; k < c.g_rows[i].index.size(); ++k) dense[i][c.g_rows[i].index[k]] = c.g_rows[i].value[k];
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> x(n);
      for (auto& v : x) v = rng.uniform(-3.0, 3.0);
      double obj = 0.0, min_g = kInf;
      for (int j = 0; j < n; ++j) obj += c.cost[j] * x[j];
      for (int i = 0; i < c.g_count(); ++i) {
        double g = -c.g_rhs[i];
        for (int j = 0; j < n; ++j) g += dense[i][j] * x[j];
        min_g = std::min(min_g, g);
      }
      const LpEvaluation e = evaluate(c, x);
      CHECK(std::abs(e.objective - obj) <= 1e-12);
      CHECK(std::abs(e.min_g - min_g) <= 1e-12);
    }
    const LpSolution sol = solve_lp(c);
    REQUIRE(sol.status == LpSolveStatus::optimal);
    const LpEvaluation at = evaluate(c, sol.x);
    CHECK(at.min_g >= -1e-6);
    CHECK(at.max_h <= 1e-6);
  }

  TEST_CASE("customer objective matches the closed form and energy balance closes") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Instance in = esstest::random_instance(1, 6, seed, 20.0);
      const LinearProgram lp = build_llm_c(in, 0, 8.0);
      const LpSolution sol = solve_lp(lp);
      REQUIRE(sol.status == LpSolveStatus::optimal);
      const ScheduleSet s = customer_schedule(in, lp, sol.x);
      CHECK(std::abs(sol.objective - customer_llm_objective(in, 0, s)) <= 1e-9 * std::max(1.0, std::abs(sol.objective)));
      const Series e = soc_trajectory(in.storage, 8.0, s.customer_ch[0], s.customer_dis[0],
                                      in.storage.soc_ini_customer[0], in.dt());
      CHECK(std::abs(e.back() - 8.0 * in.storage.soc_ini_customer[0]) <= 1e-9);
    }
  }

  TEST_CASE("more capacity never hurts a lower level") {
    esstest::Rng rng(23);
    for (int k = 0; k < 10; ++k) {
      const Instance in = esstest::random_instance(1, 6, 200 + k, 30.0);
      const double s1 = rng.uniform(0.0, 15.0), s2 = s1 + rng.uniform(0.1, 15.0);
      const double c1 = solve_lp(build_llm_c(in, 0, s1)).objective, c2 = solve_lp(build_llm_c(in, 0, s2)).objective;
      const double d1 = solve_lp(build_llm_d(in, s1)).objective, d2 = solve_lp(build_llm_d(in, s2)).objective;
      CHECK(c2 <= c1 + 1e-9);
      CHECK(d2 <= d1 + 1e-9);
    }
  }
}
