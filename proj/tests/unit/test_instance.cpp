#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ess/error.hpp"
#include "ess/instance.hpp"
#include "fixtures.hpp"

using namespace ess;

namespace {

Instance flat_instance(int N, int T, double dt, double load) {
  Instance in;
  in.grid = {T, dt};
  in.customer_count = N;
  in.storage.total_capacity = 10.0;
  in.prices.lmp.assign(T, 1.0);
  in.prices.tou.assign(T, 1.0);
  in.loads.customer_load.assign(N, Series(T, load));
  return in;
}

ScheduleSet zero_schedule(const Instance& in) { return ScheduleSet::idle(in); }

ScheduleSet random_schedule(const Instance& in, esstest::Rng& rng) {
  ScheduleSet s = ScheduleSet::idle(in);
  for (auto& row : s.customer_ch)
    for (auto& v : row) v = rng.uniform(0.0, 2.0);
  for (auto& row : s.customer_dis)
    for (auto& v : row) v = rng.uniform(0.0, 2.0);
  for (auto& v : s.disco_ch) v = rng.uniform(0.0, 2.0);
  for (auto& v : s.disco_dis) v = rng.uniform(0.0, 2.0);
  tighten_peaks(in, s);
  return s;
}

// Naive per-slot recomputation.
Series naive_net(const Instance& in, const ScheduleSet& s) {
  Series out(in.slots());
  for (int t = 0; t < in.slots(); ++t) {
    double v = in.loads.extra_base_load.empty() ? 0.0 : in.loads.extra_base_load[t];
    for (int n = 0; n < in.customers(); ++n) v += in.loads.customer_load[n][t];
    for (int n = 0; n < in.customers(); ++n) v += s.customer_ch[n][t] - s.customer_dis[n][t];
    v += s.disco_ch[t] - s.disco_dis[t];
    out[t] = v;
  }
  return out;
}

}  // namespace

TEST_SUITE("instance_model") {
  TEST_CASE("reference-scale instance validates") {
    Instance in;
    in.grid = {48, 0.5};
    in.customer_count = 100;
    in.storage.total_capacity = 800.0;
    in.prices.lmp.assign(48, 0.05);
    in.prices.tou.assign(48, 0.3);
    in.loads.customer_load.assign(100, Series(48, 1.5));
    ValidateOptions opt;
    opt.require_full_day = true;
    const Instance v = validate_instance(in, opt);
    CHECK(v.customers() == 100);
    CHECK(v.slots() == 48);
    CHECK(v.storage.eta_ch == doctest::Approx(0.92));
    CHECK(v.weights.lambda2 == doctest::Approx(6.69));
    CHECK(v.loads.system_load[0] == doctest::Approx(150.0));
    CHECK(v.storage.soc_ini_customer.size() == 100);
  }

  TEST_CASE("initial SoC above the upper bound is rejected") {
    Instance in = flat_instance(1, 4, 6.0, 1.0);
    in.storage.soc_ini_disco = 0.95;
    CHECK_THROWS_AS(validate_instance(in), Error);
    Instance c = flat_instance(1, 4, 6.0, 1.0);
    c.storage.soc_ini_customer = {0.95};
    CHECK_THROWS_AS(validate_instance(c), Error);
  }

  TEST_CASE("all-zero loads validate to a zero system load") {
    const Instance v = validate_instance(flat_instance(1, 4, 6.0, 0.0));
    for (double x : v.loads.system_load) CHECK(x == 0.0);
  }

  TEST_CASE("structural errors") {
    Instance bad = flat_instance(2, 4, 6.0, 1.0);
    bad.prices.lmp.pop_back();
    CHECK_THROWS_AS(validate_instance(bad), Error);
    Instance neg = flat_instance(1, 4, 6.0, 1.0);
    neg.loads.customer_load[0][2] = -0.1;
    CHECK_THROWS_AS(validate_instance(neg), Error);
    Instance dt = flat_instance(1, 4, 0.0, 1.0);
    CHECK_THROWS_AS(validate_instance(dt), Error);
    Instance tou = flat_instance(1, 4, 6.0, 1.0);
    tou.prices.tou[1] = -0.01;
    CHECK_THROWS_AS(validate_instance(tou), Error);
    Instance lmp = flat_instance(1, 4, 6.0, 1.0);
    lmp.prices.lmp[1] = -0.01;  // negative wholesale prices are legal
    CHECK_NOTHROW(validate_instance(lmp));
    Instance day = flat_instance(1, 4, 5.0, 1.0);
    ValidateOptions full;
    full.require_full_day = true;
    CHECK_THROWS_AS(validate_instance(day, full), Error);
  }

  TEST_CASE("net system load") {
    const Instance in = validate_instance(flat_instance(1, 4, 1.0, 4.0));
    ScheduleSet s = zero_schedule(in);
    CHECK(net_system_load(in, s) == in.loads.system_load);
    s.customer_ch[0][0] = 4.0;
    s.customer_dis[0][2] = 4.0;
    const Series net = net_system_load(in, s);
    CHECK(net == Series{8.0, 4.0, 0.0, 4.0});

    esstest::Rng rng(7);
    for (int k = 0; k < 20; ++k) {
      const Instance r = esstest::random_instance(3, 6, 100 + k, 30.0);
      const ScheduleSet a = random_schedule(r, rng);
      const Series got = net_system_load(r, a);
      const Series want = naive_net(r, a);
      for (int t = 0; t < r.slots(); ++t) CHECK(std::abs(got[t] - want[t]) <= 1e-12);
    }
  }

  TEST_CASE("net load is affine in the schedules") {
    esstest::Rng rng(11);
    const Instance in = esstest::random_instance(2, 5, 3, 20.0);
    const ScheduleSet a = random_schedule(in, rng), b = random_schedule(in, rng);
    ScheduleSet sum = a;
    for (int n = 0; n < 2; ++n)
      for (int t = 0; t < 5; ++t) {
        sum.customer_ch[n][t] += b.customer_ch[n][t];
        sum.customer_dis[n][t] += b.customer_dis[n][t];
      }
    for (int t = 0; t < 5; ++t) {
      sum.disco_ch[t] += b.disco_ch[t];
      sum.disco_dis[t] += b.disco_dis[t];
    }
    const Series n0 = net_system_load(in, zero_schedule(in));
    const Series na = net_system_load(in, a), nb = net_system_load(in, b), ns = net_system_load(in, sum);
    for (int t = 0; t < 5; ++t) CHECK(std::abs((ns[t] - n0[t]) - (na[t] - n0[t]) - (nb[t] - n0[t])) <= 1e-12);
  }

  TEST_CASE("system peak") {
    const Series a{1.0, 5.0, 3.0};
    CHECK(system_peak(a) == 5.0);
    const Series c(6, 2.5);
    CHECK(system_peak(c) == 2.5);
    const Series empty;
    CHECK_THROWS_AS(system_peak(empty), Error);
    esstest::Rng rng(5);
    for (int k = 0; k < 20; ++k) {
      Series v(rng.integer(1, 30));
      for (auto& x : v) x = rng.uniform(-5.0, 5.0);
      Series sorted = v;
      std::sort(sorted.begin(), sorted.end());
      CHECK(system_peak(v) == sorted.back());
    }
  }

  TEST_CASE("cost kernels") {
    Instance raw = flat_instance(1, 4, 1.0, 1.0);
    const Instance in = validate_instance(raw);
    CHECK(disco_cost(in, zero_schedule(in)) == doctest::Approx(4.0));

    Instance t = flat_instance(1, 4, 0.5, 1.0);
    t.prices.tou.assign(4, 2.0);
    const Instance tin = validate_instance(t);
    CHECK(customer_cost_total(tin, zero_schedule(tin)) == doctest::Approx(4.0));

    esstest::Rng rng(9);
    for (int k = 0; k < 10; ++k) {
      Instance r = esstest::random_instance(2, 6, 40 + k, 20.0);
      const ScheduleSet s = random_schedule(r, rng);
      const Series net = naive_net(r, s);
      double lmp = 0.0, tou = 0.0;
      for (int i = 0; i < r.slots(); ++i) {
        lmp += r.prices.lmp[i] * net[i] * r.dt();
        tou += r.prices.tou[i] * net[i] * r.dt();
      }
      CHECK(std::abs(disco_cost(r, s) - lmp) <= 1e-9 * std::abs(lmp));
      CHECK(std::abs(customer_cost_total(r, s) - tou) <= 1e-9 * std::abs(tou));
      r.prices.tou = r.prices.lmp;
      CHECK(customer_cost_total(r, s) == doctest::Approx(disco_cost(r, s)).epsilon(1e-12));
    }
  }

  TEST_CASE("baseline costs do not depend on the division") {
    const Instance in = esstest::random_instance(2, 6, 21, 20.0);
    const ScheduleSet idle = zero_schedule(in);
    double expect = 0.0;
    for (int t = 0; t < in.slots(); ++t) expect += in.prices.lmp[t] * in.loads.system_load[t] * in.dt();
    CHECK(disco_cost(in, idle) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("customer lower-level objective") {
    Instance flat = flat_instance(1, 4, 6.0, 3.0);
    const Instance fin = validate_instance(flat);
    CHECK(customer_llm_objective(fin, 0, zero_schedule(fin)) == doctest::Approx(0.0));

    Instance in = flat_instance(1, 4, 1.0, 4.0);
    in.storage.total_capacity = 4.0;
    in.storage.eta_ch = in.storage.eta_dis = 1.0;
    in.storage.power_ratio = 1.0;
    in.storage.soc_lower = 0.0;
    in.storage.soc_upper = 1.0;
    in.storage.soc_ini_customer = {0.0};
    in.prices.tou = {1.0, 1.0, 2.0, 2.0};
    in.weights.alpha = 0.01;
    const Instance v = validate_instance(in);
    ScheduleSet s = zero_schedule(v);
    s.customer_ch[0] = {2.0, 2.0, 0.0, 0.0};
    s.customer_dis[0] = {0.0, 0.0, 2.0, 2.0};
    tighten_peaks(v, s);
    CHECK(customer_llm_objective(v, 0, s) == doctest::Approx(-3.96).epsilon(1e-12));
  }

  TEST_CASE("lossy cycling under a flat tariff costs money") {
    Instance in = flat_instance(1, 4, 6.0, 2.0);
    in.storage.eta_ch = in.storage.eta_dis = 0.9;
    in.weights.alpha = 0.0;
    const Instance v = validate_instance(in);
    esstest::Rng rng(3);
    for (int k = 0; k < 20; ++k) {
      ScheduleSet s = zero_schedule(v);
      const double ch = rng.uniform(0.01, 0.4);
      s.customer_ch[0][0] = ch;
      s.customer_dis[0][2] = ch * 0.81;  // energy-neutral: ch * eta_ch * eta_dis
      tighten_peaks(v, s);
      CHECK(customer_llm_objective(v, 0, s) > customer_llm_objective(v, 0, zero_schedule(v)));
    }
  }

  TEST_CASE("upper objective") {
    const Instance in = esstest::random_instance(2, 6, 4, 20.0);
    const ScheduleSet idle = zero_schedule(in);
    const double peak = *std::max_element(in.loads.system_load.begin(), in.loads.system_load.end());
    const double expect = 0.8 * peak + 6.69 * disco_cost(in, idle) + 1.0 * customer_cost_total(in, idle);
    CHECK(upper_objective(in, idle) == doctest::Approx(expect).epsilon(1e-12));

    Instance pure = in;
    pure.weights = {1.0, 0.0, 0.0, 0.01};
    CHECK(upper_objective(pure, idle) == doctest::Approx(peak));

    ScheduleSet low = idle;
    low.system_peak = peak - 0.5;
    CHECK_THROWS_AS(upper_objective(in, low), Error);

    esstest::Rng rng(13);
    const ScheduleSet s = random_schedule(in, rng);
    const Series net = naive_net(in, s);
    double lmp = 0.0, tou = 0.0;
    for (int t = 0; t < in.slots(); ++t) {
      lmp += in.prices.lmp[t] * net[t] * in.dt();
      tou += in.prices.tou[t] * net[t] * in.dt();
    }
    const double want = 0.8 * *std::max_element(net.begin(), net.end()) + 6.69 * lmp + tou;
    CHECK(std::abs(upper_objective(in, s) - want) <= 1e-9 * std::abs(want));
  }

  TEST_CASE("stored-energy trajectory") {
    StorageParams st;
    const Series zero(3, 0.0);
    CHECK(soc_trajectory(st, 10.0, zero, zero, 0.5, 1.0) == Series(3, 5.0));
    CHECK(soc_trajectory(st, 0.0, zero, zero, 0.5, 1.0) == Series(3, 0.0));
    const Series ch{1.0, 0.0}, dis{0.0, 0.8464};
    const Series e = soc_trajectory(st, 10.0, ch, dis, 0.5, 1.0);
    CHECK(e[0] == doctest::Approx(5.92).epsilon(1e-12));
    CHECK(e[1] == doctest::Approx(5.0).epsilon(1e-12));
  }
}
