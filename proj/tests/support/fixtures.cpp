#include "fixtures.hpp"

namespace esstest {

ess::Instance fixture_instance(int customers, int slots, std::uint64_t seed) {
  Rng rng(seed);
  ess::Instance in;
  in.grid = {slots, 24.0 / slots};
  in.customer_count = customers;
  in.storage.total_capacity = 25.0;
  in.storage.eta_ch = in.storage.eta_dis = 1.0;
  for (int t = 0; t < slots; ++t) {
    in.prices.lmp.push_back(0.01 * rng.integer(1, 9));
    in.prices.tou.push_back(0.01 * rng.integer(15, 45));
  }
  in.loads.customer_load.assign(customers, ess::Series(slots));
  for (auto& row : in.loads.customer_load)
    for (auto& v : row) v = rng.integer(1, 10);
  return ess::validate_instance(in);
}

std::string FixtureId::name() const {
  return "N" + std::to_string(customers) + "T" + std::to_string(slots) + "s" + std::to_string(seed);
}

std::vector<FixtureId> fixture_suite() {
  std::vector<FixtureId> out;
  for (int n = 1; n <= 2; ++n)
    for (int t : {4, 6})
      for (std::uint64_t s = 1; s <= 8; ++s) out.push_back({n, t, s});
  return out;
}

ess::Instance random_instance(int customers, int slots, std::uint64_t seed, double total_capacity) {
  Rng rng(seed);
  ess::Instance in;
  in.grid = {slots, 24.0 / slots};
  in.customer_count = customers;
  in.storage.total_capacity = total_capacity;
  for (int t = 0; t < slots; ++t) {
    in.prices.lmp.push_back(rng.uniform(0.02, 0.07));
    in.prices.tou.push_back(rng.uniform(0.2, 0.45));
  }
  in.loads.customer_load.assign(customers, ess::Series(slots));
  for (auto& row : in.loads.customer_load)
    for (auto& v : row) v = rng.uniform(2.0, 7.0);
  return ess::validate_instance(in);
}

}  // namespace esstest
