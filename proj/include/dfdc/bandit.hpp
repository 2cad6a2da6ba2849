#pragma once

// Expert-advice bandit engine with delayed, decaying feedback.
//
// Actions and experts are 0-based throughout. A round consists of mixing the
// experts' advice into an action distribution, sampling one action, and, when
// feedback for some earlier action arrives, shrinking the weight of every
// expert that recommended that action.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dfdc/rng.hpp"

namespace dfdc {

enum class Algorithm { exp4, exp4_dfdc };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

// Weights whose maximum drops below this are rescaled so the maximum is 1.
inline constexpr double kRenormalizeThreshold = 1e-100;

class WeightState {
 public:
  // Unit weights for every expert, round 1. Throws std::invalid_argument on
  // zero experts, zero actions or eta outside (0, 1].
  WeightState(std::size_t num_experts, std::size_t num_actions, double eta);

  // Explicit weights, mainly for tests and replay. Weights must be finite and
  // strictly positive.
  static WeightState from_weights(std::vector<double> weights,
                                  std::size_t num_actions, double eta);

  std::span<const double> weights() const { return weights_; }
  double weight(std::size_t expert) const { return weights_.at(expert); }
  double eta() const { return eta_; }
  std::size_t num_experts() const { return weights_.size(); }
  std::size_t num_actions() const { return num_actions_; }
  std::uint64_t round() const { return round_; }

  // W_t.
  double total() const;
  double max_weight() const;

  void set_eta(double eta);
  void advance_round() { ++round_; }

  // Multiplies expert i's weight by exp(-eta * costs[i] / K). Costs are the
  // per-expert dot products x_hat . xi_i and must be finite and >= 0. Does
  // not advance the round. Rescales when the maximum weight underflows past
  // kRenormalizeThreshold and floors every weight at the smallest normal
  // double so weights stay strictly positive.
  void apply_expert_costs(std::span<const double> costs);

  void renormalize();

 private:
  WeightState() = default;

  std::vector<double> weights_;
  double eta_ = 1.0;
  std::size_t num_actions_ = 0;
  std::uint64_t round_ = 1;
};

inline WeightState init_state(std::size_t num_experts, std::size_t num_actions,
                              double eta) {
  return WeightState(num_experts, num_actions, eta);
}

/// N x K matrix of expert recommendations; row i is expert i's distribution
/// over actions.
class AdviceMatrix {
 public:
  AdviceMatrix(std::size_t num_experts, std::size_t num_actions);

  std::size_t num_experts() const { return rows_; }
  std::size_t num_actions() const { return cols_; }

  double operator()(std::size_t expert, std::size_t action) const {
    return data_[expert * cols_ + action];
  }
  double& operator()(std::size_t expert, std::size_t action) {
    return data_[expert * cols_ + action];
  }

  std::span<const double> row(std::size_t expert) const {
    return {data_.data() + expert * cols_, cols_};
  }

  // Replaces row `expert` with a one-hot vector on `action`.
  void set_one_hot(std::size_t expert, std::size_t action);
  void set_row(std::size_t expert, std::span<const double> probs);

  // Throws std::invalid_argument unless every entry is in [0, 1] and every
  // row sums to 1 within 1e-9.
  void validate() const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

struct ActionDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t j) const { return probs[j]; }
};

// p_j = (1 - eta) * sum_i w_i xi_i^j / W + eta / K. Accepts eta in [0, 1] so
// the pure-exploitation limit can be evaluated. `out` is resized to K.
void mix_distribution(std::span<const double> weights,
                      const AdviceMatrix& advice, double eta,
                      std::vector<double>& out);

ActionDistribution action_distribution(const WeightState& state,
                                       const AdviceMatrix& advice);

// Inverse-CDF draw with a left-to-right scan. Consumes exactly one uniform
// from `rng`.
std::size_t sample_action(std::span<const double> probs, Rng& rng);
inline std::size_t sample_action(const ActionDistribution& dist, Rng& rng) {
  return sample_action(std::span<const double>(dist.probs), rng);
}

struct DelayedFeedback {
  std::size_t action = 0;
  double cost = 0.0;            // raw cost x in [0, 1]
  std::uint64_t delay = 1;      // d >= 1
  std::uint64_t threshold = 1;  // m >= 1
  double prob = 1.0;            // probability the action was taken with
};

struct EstimateOptions {
  bool importance_weighting = true;
  bool cap = false;
};

/// K-dimensional estimated cost vector with at most one non-zero entry.
class CostEstimate {
 public:
  explicit CostEstimate(std::size_t num_actions) : num_actions_(num_actions) {}
  CostEstimate(std::size_t num_actions, std::size_t action, double value);

  std::size_t size() const { return num_actions_; }
  double operator[](std::size_t j) const;
  bool is_zero() const { return !entry_ || entry_->second == 0.0; }
  std::optional<std::pair<std::size_t, double>> entry() const { return entry_; }

  double dot(std::span<const double> advice_row) const;
  std::vector<double> dense() const;

 private:
  std::size_t num_actions_;
  std::optional<std::pair<std::size_t, double>> entry_;
};

// x / (d p) with importance weighting, x / d without; zero when d > m.
// Throws std::invalid_argument on malformed feedback, including p = 0 with
// importance weighting on.
CostEstimate estimate_cost(const DelayedFeedback& fb, std::size_t num_actions,
                           EstimateOptions opts = {});

// Scalar form of estimate_cost for the fed-back action.
double estimate_cost_value(const DelayedFeedback& fb, EstimateOptions opts = {});

// w_i <- w_i exp(-eta x_hat . xi_i / K), then advances the round.
void update_weights(WeightState& state, const CostEstimate& est,
                    const AdviceMatrix& advice);

inline void renormalize(WeightState& state) { state.renormalize(); }

// min(1, sqrt(K ln N / (2T))). Requires N >= 2.
double optimal_learning_rate(std::size_t num_actions, std::size_t num_experts,
                             std::uint64_t horizon);

// exp4:       (e - 1) eta T + K ln N / eta
// exp4_dfdc:  2 eta T + K ln N / eta
double regret_bound(double eta, std::size_t num_actions,
                    std::size_t num_experts, double horizon,
                    Algorithm algorithm);

// 2 sqrt(2 K T ln N): the dfdc bound at the optimal learning rate.
double optimal_regret_bound(std::size_t num_actions, std::size_t num_experts,
                            double horizon);

}  // namespace dfdc
