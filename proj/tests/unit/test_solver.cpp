#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ess/io.hpp"
#include "ess/mps.hpp"
#include "ess/oracle.hpp"
#include "ess/solver.hpp"
#include "oracles.hpp"

using namespace ess;

namespace {

MathModel two_var_lp() {
  MathModel m;
  m.add_col("x", 0.0, kInf, -1.0);
  m.add_col("y", 0.0, kInf, -2.0);
  SparseRow r;
  r.add(0, 1.0);
  r.add(1, 1.0);
  m.add_row("cap", r, -kInf, 1.0);
  return m;
}

// min -x - w, x in [0, 3], w in [0, 3], pair (w, x - 1 >= 0).
// Root relaxation x = 3, w = 3 violates the pair; optimum -4 at x = 1.
MpecModel toy_mpec(double w_upper) {
  MpecModel mp;
  auto& m = mp.model;
  m.add_col("x", 0.0, 3.0, -1.0);
  m.add_col("w", 0.0, w_upper, -1.0);
  SparseRow g;
  g.add(0, 1.0);
  m.add_row("g", g, 1.0, kInf);
  mp.pairs.push_back({1, 0, 0, 1, 0});
  return mp;
}

SolveOptions plain_options() {
  SolveOptions o;
  o.value_function_rows = false;
  return o;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("small LPs") {
    const SolveResult r = solve_lp(two_var_lp());
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-2.0));
    CHECK(r.x[0] == doctest::Approx(0.0));
    CHECK(r.x[1] == doctest::Approx(1.0));

    MathModel u;
    u.add_col("x", 0.0, kInf, -1.0);
    CHECK(solve_lp(u).status == SolveStatus::unbounded);

    MathModel inf;
    inf.add_col("x", 0.0, 1.0, 1.0);
    SparseRow row;
    row.add(0, 1.0);
    inf.add_row("r", row, 2.0, kInf);
    CHECK(solve_lp(inf).status == SolveStatus::infeasible);
  }

  TEST_CASE("degenerate cycling example terminates at its optimum") {
    const SolveResult r = solve_lp(esstest::beale_lp());
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-0.05).epsilon(1e-12));
  }

  TEST_CASE("random LPs against vertex enumeration and duality") {
    esstest::Rng rng(2024);
    for (int k = 0; k < 15; ++k) {
      const auto lp = esstest::random_dense_lp(rng, rng.integer(2, 8), rng.integer(1, 6));
      const SolveResult r = solve_lp(esstest::to_model(lp));
      REQUIRE(r.status == SolveStatus::optimal);
      CHECK(std::abs(r.objective - esstest::vertex_enumeration(lp)) <= 1e-9);
    }
    for (int k = 0; k < 15; ++k) {
      const MathModel m = esstest::random_general_lp(rng, rng.integer(5, 25), rng.integer(3, 30));
      const SolveResult r = solve_lp(m);
      REQUIRE(r.status == SolveStatus::optimal);
      const auto d = esstest::duality_check(m, r.x, r.duals);
      CHECK(d.primal_violation <= 1e-7);
      CHECK(d.dual_violation <= 1e-9);
      CHECK(std::abs(d.primal_objective - d.dual_objective) <= 1e-7 * std::max(1.0, std::abs(d.primal_objective)));
    }
  }

  TEST_CASE("knapsack against exhaustive enumeration") {
    const double value[4] = {5.0, 4.0, 3.0, 7.0}, weight[4] = {4.0, 3.0, 2.0, 5.0};
    MilpModel milp;
    SparseRow cap;
    for (int j = 0; j < 4; ++j) {
      milp.model.add_col("b", 0.0, 1.0, -value[j], true);
      cap.add(j, weight[j]);
    }
    milp.model.add_row("cap", cap, -kInf, 9.0);
    double best = 0.0;
    for (int mask = 0; mask < 16; ++mask) {
      double v = 0.0, w = 0.0;
      for (int j = 0; j < 4; ++j)
        if (mask >> j & 1) v += value[j], w += weight[j];
      if (w <= 9.0) best = std::max(best, v);
    }
    const SolveResult r = solve_milp(milp);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-best));
    for (std::size_t k = 1; k < r.bound_trace.size(); ++k) CHECK(r.incumbent_trace[k] <= r.incumbent_trace[k - 1]);

    MilpModel fixed = milp;
    for (int j = 0; j < 4; ++j) fixed.model.col_lb[j] = fixed.model.col_ub[j] = (j % 2 == 0) ? 1.0 : 0.0;
    MathModel relaxed = fixed.model;
    std::fill(relaxed.integer.begin(), relaxed.integer.end(), 0);
    const SolveResult fr = solve_milp(fixed), lr = solve_lp(relaxed);
    REQUIRE(fr.status == SolveStatus::optimal);
    CHECK(fr.objective == doctest::Approx(lr.objective));
  }

  TEST_CASE("complementarity branching on a toy program") {
    const SolveResult r = solve_lpcc(toy_mpec(3.0), plain_options());
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(r.objective == doctest::Approx(-4.0));
    CHECK(r.x[0] == doctest::Approx(1.0));

    SolveOptions one = plain_options();
    one.node_limit = 1;
    const SolveResult lim = solve_lpcc(toy_mpec(3.0), one);
    CHECK(lim.status == SolveStatus::limit);
    CHECK(lim.bound <= -4.0 + 1e-9);

    // w capped at 0: the root already satisfies the pair.
    const SolveResult root = solve_lpcc(toy_mpec(0.0), plain_options());
    REQUIRE(root.status == SolveStatus::optimal);
    CHECK(root.nodes == 1);
    CHECK(root.objective == doctest::Approx(-3.0));
  }

  TEST_CASE("bilevel solvers agree on a small storage instance") {
    const Instance in = esstest::fixture_instance(1, 4, 5);
    BilevelRequest a, b;
    b.mode = SolveMode::bigm;
    const BilevelOutcome la = solve_bilevel(in, a), lb = solve_bilevel(in, b);
    REQUIRE(la.result.status == SolveStatus::optimal);
    REQUIRE(lb.result.status == SolveStatus::optimal);
    CHECK(std::abs(la.result.objective - lb.result.objective) <= 1e-6 * std::max(1.0, std::abs(lb.result.objective)));

    // Identical inputs give identical trees.
    const BilevelOutcome again = solve_bilevel(in, a);
    CHECK(again.result.nodes == la.result.nodes);
    CHECK(again.result.x == la.result.x);

    for (std::size_t k = 1; k < la.result.bound_trace.size(); ++k)
      CHECK(la.result.incumbent_trace[k] <= la.result.incumbent_trace[k - 1]);
  }

  TEST_CASE("solution extraction") {
    Instance zero = esstest::fixture_instance(2, 4, 1);
    zero.storage.total_capacity = 0.0;
    const BilevelOutcome z = solve_bilevel(zero, {});
    REQUIRE(z.result.status == SolveStatus::optimal);
    CHECK(z.solution.division.s_disco == 0.0);
    for (double s : z.solution.division.s_customer) CHECK(s == 0.0);
    for (const auto& row : z.solution.schedules.customer_ch)
      for (double v : row) CHECK(std::abs(v) <= 1e-9);

    const Instance in = esstest::random_instance(2, 6, 8, 20.0);
    const BilevelOutcome out = solve_bilevel(in, {});
    REQUIRE(out.result.status == SolveStatus::optimal);
    CHECK(std::abs(upper_objective(in, out.solution.schedules) - out.result.objective) <=
          1e-9 * std::max(1.0, std::abs(out.result.objective)));
    CHECK(check_schedule_invariants(in, out.solution.division, out.solution.schedules).pass());

    SolveResult broken = out.result;
    broken.x[assemble_mpec(in).peak_col] -= 1.0;
    CHECK_THROWS(extract_solution(broken, assemble_mpec(in)));
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code(SolveStatus::optimal) == 0);
    CHECK(exit_code(SolveStatus::infeasible) == 2);
    CHECK(exit_code(SolveStatus::unbounded) == 3);
    CHECK(exit_code(SolveStatus::limit) == 4);
  }
}

TEST_SUITE("mps") {
  TEST_CASE("one-variable LP") {
    LinearProgram lp;
    lp.vars.push_back({"x"});
    lp.cost = {1.0};
    SparseRow g;
    g.add(0, 1.0);
    lp.g_rows.push_back(g);
    lp.g_rhs.push_back(0.0);
    lp.g_family.push_back(1);
    lp.g_slot.push_back(0);
    const std::string text = to_mps(lp.to_model());
    const auto parsed = esstest::read_mps(text);
    CHECK(parsed.rows() == 1);
    CHECK(parsed.row_type[0] == 'G');
    CHECK(parsed.cols() == 1);
    CHECK(parsed.nonzeros == 1);
    CHECK(text.find("ROWS\n N  OBJ\n G  R0000001\n") != std::string::npos);
  }

  TEST_CASE("numbers fit the field") {
    for (double v : {0.0, 1.0, -1.0, 1.0 / 3.0, -2.0 / 3.0 * 1e-7, 6.02214076e23, -123456789.123456, 0.1})
      CHECK(mps_number(v).size() <= 12);
    CHECK(std::stod(mps_number(1.0 / 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK_THROWS(mps_number(kInf));
  }

  TEST_CASE("storage MILP round-trips through an independent reader") {
    const Instance in = esstest::random_instance(2, 4, 6, 20.0);
    const MilpModel milp = linearize_big_m(assemble_mpec(in), BigMPolicy{});
    const std::string text = to_mps(milp.model);
    const auto parsed = esstest::read_mps(text);
    const auto cmp = esstest::compare_mps(parsed, milp.model);
    INFO(cmp.detail);
    CHECK(cmp.counts_equal);
    CHECK(cmp.worst_relative <= 1e-5);
    CHECK(parsed.integer_count() == milp.binary_count());
    CHECK(to_mps(milp.model) == text);

    const auto path = std::filesystem::temp_directory_path() / "ess_unit_roundtrip.mps";
    export_mps(milp, path.string());
    CHECK(read_text_file(path.string()) == text);
    std::filesystem::remove(path);
    CHECK_THROWS(export_mps(milp, "/nonexistent-dir/x.mps"));
  }
}
