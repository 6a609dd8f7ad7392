#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "ess/error.hpp"
#include "ess/io.hpp"
#include "ess/scenario.hpp"
#include "fixtures.hpp"

using namespace ess;
namespace fs = std::filesystem;

namespace {

std::string prices_text(int rows) {
  std::string s = "t,lmp_per_kwh,tou_per_kwh\n";
  for (int t = 1; t <= rows; ++t) s += std::to_string(t) + ",0.05,0.3\n";
  return s;
}

std::string loads_text(int slots) {
  std::string s = "t,customer_id,load_kw\n";
  for (int t = 1; t <= slots; ++t) s += std::to_string(t) + ",a,2\n";
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ess_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Series aggregate(const Instance& in) {
  Series s(in.slots(), 0.0);
  for (const auto& row : in.loads.customer_load)
    for (int t = 0; t < in.slots(); ++t) s[t] += row[t];
  return s;
}

}  // namespace

TEST_SUITE("cli_scenarios") {
  TEST_CASE("loader errors name the offending file") {
    try {
      parse_inputs(loads_text(48), "loads.csv", prices_text(47), "prices.csv", "slot_count = 48\n", "cfg.txt");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::parse);
      CHECK(std::string(e.what()).find("prices.csv") != std::string::npos);
    }
    try {
      parse_inputs(loads_text(4), "loads.csv", prices_text(4), "prices.csv", "colour = blue\n", "cfg.txt");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("cfg.txt:1") != std::string::npos);
      CHECK(std::string(e.what()).find("colour") != std::string::npos);
    }
    CHECK_THROWS_AS(load_inputs("/nonexistent/loads.csv", "/nonexistent/prices.csv", ""), Error);
  }

  TEST_CASE("defaults are recorded") {
    const RunConfig cfg = parse_inputs(loads_text(4), "l", prices_text(4), "p", "", "c");
    CHECK(cfg.instance.slots() == 4);
    CHECK(cfg.instance.dt() == doctest::Approx(6.0));
    const auto has = [&](const std::string& prefix) {
      return std::any_of(cfg.provenance.begin(), cfg.provenance.end(),
                         [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
    };
    CHECK(has("alpha = "));
    CHECK(has("slot_count = 4"));
    const RunConfig set = parse_inputs(loads_text(4), "l", prices_text(4), "p", "alpha = 0.2\n", "c");
    CHECK(set.instance.weights.alpha == 0.2);
    CHECK(std::none_of(set.provenance.begin(), set.provenance.end(),
                       [](const std::string& s) { return s.rfind("alpha", 0) == 0; }));
  }

  TEST_CASE("formatted inputs parse back to the same run") {
    const RunConfig cfg = gen_synthetic(LoadProfile::mixed, PriceShape::conforming, 3, 8, 5);
    const RunConfig back = parse_inputs(format_loads(cfg.instance), "l", format_prices(cfg.instance), "p",
                                        format_config(cfg), "c");
    CHECK(back.instance.loads.customer_load == cfg.instance.loads.customer_load);
    CHECK(back.instance.prices.lmp == cfg.instance.prices.lmp);
    CHECK(back.instance.prices.tou == cfg.instance.prices.tou);
    CHECK(back.instance.storage.total_capacity == cfg.instance.storage.total_capacity);
    CHECK(format_config(back) == format_config(cfg));
  }

  TEST_CASE("synthetic generator") {
    const RunConfig a = gen_synthetic(LoadProfile::duck, PriceShape::conforming, 4, 48, 7);
    const RunConfig b = gen_synthetic(LoadProfile::duck, PriceShape::conforming, 4, 48, 7);
    CHECK(format_loads(a.instance) == format_loads(b.instance));
    CHECK(format_prices(a.instance) == format_prices(b.instance));
    CHECK(a.instance.storage.total_capacity == 32.0);
    CHECK(pearson(a.instance.prices.lmp, aggregate(a.instance)) > 0.5);

    const RunConfig c = gen_synthetic(LoadProfile::typical, PriceShape::conflicting, 4, 48, 7);
    CHECK(pearson(c.instance.prices.lmp, c.instance.prices.tou) < -0.3);
    CHECK(parse_load_profile("mixed") == LoadProfile::mixed);
    CHECK_THROWS_AS(parse_price_shape("sideways"), Error);
  }

  TEST_CASE("zero capacity gives zero reductions") {
    RunConfig cfg = gen_synthetic(LoadProfile::duck, PriceShape::conflicting, 2, 6, 1);
    cfg.instance.storage.total_capacity = 0.0;
    for (int s = 1; s <= 3; ++s) {
      const DayReport r = run_scenario(cfg.instance, scenario_from_int(s), cfg.request);
      REQUIRE(r.ok());
      for (const auto& p : r.reductions) CHECK(p.reduction_pct == 0.0);
    }
  }

  TEST_CASE("report round-trip") {
    const RunConfig cfg = gen_synthetic(LoadProfile::duck, PriceShape::conflicting, 2, 6, 2);
    std::vector<DayReport> reports;
    for (int s = 1; s <= 3; ++s) reports.push_back(run_scenario(cfg.instance, scenario_from_int(s), cfg.request, 1));
    for (const auto& r : reports) REQUIRE(r.ok());
    const Manifest manifest = {{"command", "unit"}, {"seed", "2"}};
    const fs::path dir = scratch("report");
    emit_report(reports, manifest, dir.string());

    std::ifstream series(dir / "series_day1.csv");
    std::string header;
    std::getline(series, header);
    CHECK(std::count(header.begin(), header.end(), ',') == 4);  // t plus four series

    const ReportBundle back = read_report(dir.string());
    CHECK(back.manifest == manifest);
    REQUIRE(back.reports.size() == reports.size());
    for (std::size_t k = 0; k < reports.size(); ++k) {
      CHECK(back.reports[k].scenario == reports[k].scenario);
      CHECK(std::abs(back.reports[k].upper_objective - reports[k].upper_objective) <= 1e-9);
      CHECK(std::abs(back.reports[k].division.s_disco - reports[k].division.s_disco) <= 1e-9);
      REQUIRE(back.reports[k].reductions.size() == reports[k].reductions.size());
      for (std::size_t p = 0; p < reports[k].reductions.size(); ++p)
        CHECK(std::abs(back.reports[k].reductions[p].reduction_pct - reports[k].reductions[p].reduction_pct) <= 1e-9);
    }
    const fs::path again = scratch("report_again");
    emit_report(reports, manifest, again.string());
    for (const auto& entry : fs::directory_iterator(dir))
      CHECK(read_text_file(entry.path().string()) == read_text_file((again / entry.path().filename()).string()));
    CHECK_FALSE(format_reduction_table(reports).empty());
    fs::remove_all(dir);
    fs::remove_all(again);
  }

  TEST_CASE("identical days give identical results") {
    const RunConfig cfg = gen_synthetic(LoadProfile::duck, PriceShape::conflicting, 2, 6, 3);
    const DayInput day{cfg.instance.loads.customer_load, cfg.instance.prices};
    const CycleResult r = daily_cycle(cfg, {day, day}, {ScenarioId::shared});
    CHECK(r.failures.empty());
    REQUIRE(r.reports.size() == 2);
    CHECK(r.reports[0].day == 1);
    CHECK(r.reports[1].day == 2);
    CHECK(r.reports[0].upper_objective == r.reports[1].upper_objective);
    CHECK(r.reports[0].division.s_customer == r.reports[1].division.s_customer);
  }

  TEST_CASE("a bad day is recorded and the cycle continues") {
    const RunConfig cfg = gen_synthetic(LoadProfile::typical, PriceShape::conforming, 2, 6, 4);
    DayInput good{cfg.instance.loads.customer_load, cfg.instance.prices};
    DayInput bad = good;
    bad.prices.lmp.pop_back();
    const CycleResult r = daily_cycle(cfg, {bad, good}, {ScenarioId::disco_only});
    CHECK(r.failures.size() == 1);
    REQUIRE(r.reports.size() == 2);
    CHECK_FALSE(r.reports[0].ok());
    CHECK(r.reports[1].ok());
  }

  TEST_CASE("reduction arithmetic") {
    CHECK(reduction_percent(10.0, 8.0) == doctest::Approx(20.0));
    CHECK(reduction_percent(-10.0, -12.0) == doctest::Approx(20.0));
    CHECK(reduction_percent(0.0, 3.0) == 0.0);
    CHECK(customer_groups(1).size() == 1);
    const auto g = customer_groups(5);
    REQUIRE(g.size() == 2);
    CHECK(g[0].size() == 3);
    CHECK(g[1].size() == 2);
  }
}
