#pragma once

// Learned cache replacement over the {LRU, LFU} expert pair.
//
// On every miss with a full cache the engine mixes the two experts' victim
// recommendations into a distribution over slots, samples the victim, and
// records the eviction in a bounded history. A later miss on a key still in
// that history charges the experts that recommended its eviction, with a cost
// that decays with the key's position in the history.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfdc/bandit.hpp"
#include "dfdc/cache.hpp"
#include "dfdc/metrics.hpp"
#include "dfdc/rng.hpp"

namespace dfdc {

enum class CostMode {
  dfdc,    // x / d
  legacy,  // (0.005^(1/K))^d
};

std::string_view to_string(CostMode m);
CostMode parse_cost_mode(std::string_view s);

struct LearningRate {
  enum class Mode {
    fixed,         // eta as given
    auto_horizon,  // optimal rate for a known horizon
    auto_stream,   // optimal rate for T = 2^k during rounds [2^k, 2^(k+1))
  };

  Mode mode = Mode::auto_stream;
  double eta = 1.0;
  std::uint64_t horizon = 1;

  static LearningRate fixed(double eta) { return {Mode::fixed, eta, 1}; }
  static LearningRate for_horizon(std::uint64_t horizon) {
    return {Mode::auto_horizon, 1.0, horizon};
  }
  static LearningRate stream() { return {Mode::auto_stream, 1.0, 1}; }
};

// Legacy LeCaR reproduction constant.
inline constexpr double kLegacyLearningRate = 0.45;
inline constexpr double kLegacyDiscountBase = 0.005;

struct EngineConfig {
  std::size_t cache_size = 0;
  std::size_t history_size = 0;  // 0 means "same as cache_size"
  LearningRate learning_rate = LearningRate::stream();
  CostMode cost_mode = CostMode::dfdc;
  bool importance_weighting = false;
  bool cap = false;
  std::uint64_t seed = 0;

  std::size_t resolved_history_size() const {
    return history_size == 0 ? cache_size : history_size;
  }

  // Throws std::invalid_argument on bad fields.
  void validate() const;
};

struct AppliedFeedback {
  std::string key;
  std::uint64_t delay = 0;
  double estimate = 0.0;             // x_hat for the fed-back slot
  std::vector<double> expert_costs;  // x_hat . xi_i per expert
};

struct RequestOutcome {
  std::uint64_t round = 0;
  std::string key;
  bool hit = false;
  std::optional<std::string> evicted;
  std::optional<AppliedFeedback> feedback;
  std::vector<double> weights_after;
};

// (0.005^(1/K))^d, evaluated as 0.005^(d/K) so that d == K is exact.
double legacy_cost(std::uint64_t delay, std::size_t cache_size);

// Learning rate in effect at `round` for the given mode.
double resolve_learning_rate(const LearningRate& lr, std::size_t cache_size,
                             std::uint64_t round);

class Engine {
 public:
  explicit Engine(EngineConfig cfg);

  RequestOutcome process_request(std::string_view key, std::uint64_t round);

  // Same state transition as process_request without building the outcome.
  // Returns true on a hit.
  bool step(std::string_view key, std::uint64_t round);

  const EngineConfig& config() const { return cfg_; }
  const WeightState& weights() const { return state_; }
  const CacheState& cache() const { return cache_; }
  const EvictionHistory& history() const { return history_; }
  double eta() const { return state_.eta(); }

  // w_i / W.
  std::vector<double> normalized_weights() const;

 private:
  bool step_impl(std::string_view key, std::uint64_t round, RequestOutcome* out);
  double feedback_estimate(const HistoryMatch& m) const;

  EngineConfig cfg_;
  CacheState cache_;
  EvictionHistory history_;
  WeightState state_;
  Rng rng_;
  AdviceMatrix advice_;
  std::vector<double> probs_;
  std::vector<double> expert_costs_;
  std::size_t stream_epoch_ = 0;
};

// Feeds `keys` through the engine, continuing from its current round. Sample
// rounds in the result are relative to the start of this trace.
MetricsSeries run_trace(Engine& engine, std::span<const std::string> keys);

}  // namespace dfdc
