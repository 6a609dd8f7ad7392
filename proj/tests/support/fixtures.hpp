#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ess/instance.hpp"

namespace esstest {

// Platform-independent draws (std distributions differ between libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Inclusive range.
  int integer(int lo, int hi) { return lo + static_cast<int>(g_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 g_;
};

// Agreement family: eta = 1 and S_total = 25, integer loads and cent prices.
// Optimal divisions are then multiples of S_total/60 (quarters and thirds of
// 5 kWh), so a grid with that step contains the exact optimum.
ess::Instance fixture_instance(int customers, int slots, std::uint64_t seed);

struct FixtureId {
  int customers = 1;
  int slots = 4;
  std::uint64_t seed = 1;
  std::string name() const;
};

// N in {1, 2}, T in {4, 6}, seeds 1..8.
std::vector<FixtureId> fixture_suite();

// Default storage parameters (eta 0.92), real-valued loads and prices.
ess::Instance random_instance(int customers, int slots, std::uint64_t seed, double total_capacity);

}  // namespace esstest
