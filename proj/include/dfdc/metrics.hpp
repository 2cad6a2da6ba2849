#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace dfdc {

// Rounds between weight snapshots for a run of `horizon` rounds.
inline std::uint64_t sampling_interval(std::uint64_t horizon) {
  return std::max<std::uint64_t>(1, horizon / 1000);
}

/// Per-round record of one simulated run.
struct MetricsSeries {
  // Cost incurred in each round; round t is index t - 1. For caches this is
  // 1 on a miss and 0 on a hit.
  std::vector<double> round_costs;

  std::uint64_t hits = 0;
  std::uint64_t misses = 0;

  // Normalized expert weights w_i / W, captured every sampling_interval()
  // rounds and at the final round.
  std::vector<std::uint64_t> sample_rounds;
  std::vector<std::vector<double>> sample_weights;

  std::uint64_t rounds() const { return round_costs.size(); }

  double total_cost() const {
    double s = 0.0;
    for (double c : round_costs) s += c;
    return s;
  }

  double hit_rate() const {
    const auto n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }

  // C_A(t) for t = 1..T.
  std::vector<double> cumulative() const {
    std::vector<double> out(round_costs.size());
    double s = 0.0;
    for (std::size_t i = 0; i < round_costs.size(); ++i) out[i] = s += round_costs[i];
    return out;
  }
};

}  // namespace dfdc
