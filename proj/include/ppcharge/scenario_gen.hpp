#pragma once

#include <cstdint>

#include "ppcharge/protocol.hpp"

namespace ppcharge::bench {

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

// Randomized scenario generation over a square area. Deterministic per
// seed: the same config always produces byte-identical scenario files.
struct ScenarioConfig {
  int buyers = 5;               // I
  int sellers = 5;              // J
  int k = 2;                    // demand dimension
  std::int64_t area = 3000;     // side length in meters
  IntRange price_range{500, 2000};
  IntRange demand_price_range{100, 1000};
  IntRange d_max_range{500, 3000};
  IntRange weight_range{0, 5000};  // fixed-point, scale 10^3
  double demand_density = 0.5;     // probability a demand bit is 1
  std::uint64_t seed = 1;
};

void validate(const ScenarioConfig& cfg);
protocol::Scenario gen_scenario(const ScenarioConfig& cfg);

}  // namespace ppcharge::bench
