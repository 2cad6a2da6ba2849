#include "dfdc/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dfdc {

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("learning rate must be in (0, 1], got " +
                                std::to_string(eta));
  }
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::exp4:
      return "exp4";
    case Algorithm::exp4_dfdc:
      return "exp4-dfdc";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "exp4") return Algorithm::exp4;
  if (s == "exp4-dfdc" || s == "exp4_dfdc" || s == "dfdc") return Algorithm::exp4_dfdc;
  throw std::invalid_argument("unknown algorithm: " + std::string(s));
}

// WeightState

WeightState::WeightState(std::size_t num_experts, std::size_t num_actions,
                         double eta)
    : weights_(num_experts, 1.0), eta_(eta), num_actions_(num_actions) {
  if (num_experts == 0) throw std::invalid_argument("need at least one expert");
  if (num_actions == 0) throw std::invalid_argument("need at least one action");
  check_eta(eta);
}

WeightState WeightState::from_weights(std::vector<double> weights,
                                      std::size_t num_actions, double eta) {
  if (weights.empty()) throw std::invalid_argument("need at least one expert");
  if (num_actions == 0) throw std::invalid_argument("need at least one action");
  check_eta(eta);
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("weights must be finite and positive");
    }
  }
  WeightState s;
  s.weights_ = std::move(weights);
  s.eta_ = eta;
  s.num_actions_ = num_actions;
  return s;
}

double WeightState::total() const {
  double sum = 0.0;
  for (double w : weights_) sum += w;
  return sum;
}

double WeightState::max_weight() const {
  return *std::max_element(weights_.begin(), weights_.end());
}

void WeightState::set_eta(double eta) {
  check_eta(eta);
  eta_ = eta;
}

void WeightState::apply_expert_costs(std::span<const double> costs) {
  if (costs.size() != weights_.size()) {
    throw std::invalid_argument("expert cost vector has wrong dimension");
  }
  const double scale = eta_ / static_cast<double>(num_actions_);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double c = costs[i];
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw std::domain_error("estimated expert cost must be finite and >= 0");
    }
    if (c != 0.0) weights_[i] *= std::exp(-scale * c);
  }
  if (max_weight() < kRenormalizeThreshold) renormalize();
  constexpr double floor = std::numeric_limits<double>::min();
  for (double& w : weights_) {
    if (!std::isfinite(w)) throw std::domain_error("weight became non-finite");
    if (w < floor) w = floor;
  }
}

void WeightState::renormalize() {
  const double m = max_weight();
  for (double& w : weights_) w /= m;
}

// AdviceMatrix

AdviceMatrix::AdviceMatrix(std::size_t num_experts, std::size_t num_actions)
    : rows_(num_experts), cols_(num_actions), data_(num_experts * num_actions, 0.0) {
  if (num_experts == 0 || num_actions == 0) {
    throw std::invalid_argument("advice matrix needs N >= 1 and K >= 1");
  }
}

void AdviceMatrix::set_one_hot(std::size_t expert, std::size_t action) {
  if (expert >= rows_ || action >= cols_) {
    throw std::out_of_range("advice index out of range");
  }
  std::fill_n(data_.begin() + static_cast<std::ptrdiff_t>(expert * cols_), cols_, 0.0);
  data_[expert * cols_ + action] = 1.0;
}

void AdviceMatrix::set_row(std::size_t expert, std::span<const double> probs) {
  if (expert >= rows_) throw std::out_of_range("advice row out of range");
  if (probs.size() != cols_) throw std::invalid_argument("advice row has wrong length");
  std::copy(probs.begin(), probs.end(),
            data_.begin() + static_cast<std::ptrdiff_t>(expert * cols_));
}

void AdviceMatrix::validate() const {
  for (std::size_t i = 0; i < rows_; ++i) {
    double sum = 0.0;
    for (double v : row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("advice entries must lie in [0, 1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw std::invalid_argument("advice row " + std::to_string(i) +
                                  " does not sum to 1");
    }
  }
}

// Mixing and sampling

void mix_distribution(std::span<const double> weights, const AdviceMatrix& advice,
                      double eta, std::vector<double>& out) {
  if (weights.size() != advice.num_experts()) {
    throw std::invalid_argument("advice rows do not match number of experts");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("mixing rate must be in [0, 1]");
  }
  const std::size_t k = advice.num_actions();
  double total = 0.0;
  for (double w : weights) total += w;

  out.assign(k, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = weights[i] / total;
    const auto r = advice.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      if (r[j] != 0.0) out[j] += q * r[j];
    }
  }
  const double floor = eta / static_cast<double>(k);
  for (double& p : out) p = (1.0 - eta) * p + floor;
}

ActionDistribution action_distribution(const WeightState& state,
                                       const AdviceMatrix& advice) {
  if (advice.num_actions() != state.num_actions()) {
    throw std::invalid_argument("advice columns do not match number of actions");
  }
  ActionDistribution d;
  mix_distribution(state.weights(), advice, state.eta(), d.probs);
  return d;
}

std::size_t sample_action(std::span<const double> probs, Rng& rng) {
  if (probs.empty()) throw std::invalid_argument("empty distribution");
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(probs[j] >= 0.0) || !std::isfinite(probs[j])) {
      throw std::invalid_argument("probabilities must be finite and >= 0");
    }
    if (probs[j] > 0.0) last_positive = j;
    cum += probs[j];
    if (u < cum && probs[j] > 0.0) return j;
  }
  // u landed in the rounding gap above the final cumulative sum.
  if (last_positive == probs.size()) {
    throw std::invalid_argument("distribution has no positive entry");
  }
  return last_positive;
}

// Estimation

CostEstimate::CostEstimate(std::size_t num_actions, std::size_t action, double value)
    : num_actions_(num_actions) {
  if (action >= num_actions) throw std::out_of_range("estimate index out of range");
  entry_ = std::make_pair(action, value);
}

double CostEstimate::operator[](std::size_t j) const {
  if (j >= num_actions_) throw std::out_of_range("estimate index out of range");
  return (entry_ && entry_->first == j) ? entry_->second : 0.0;
}

double CostEstimate::dot(std::span<const double> advice_row) const {
  if (advice_row.size() != num_actions_) {
    throw std::invalid_argument("advice row has wrong length");
  }
  if (!entry_) return 0.0;
  return entry_->second * advice_row[entry_->first];
}

std::vector<double> CostEstimate::dense() const {
  std::vector<double> v(num_actions_, 0.0);
  if (entry_) v[entry_->first] = entry_->second;
  return v;
}

double estimate_cost_value(const DelayedFeedback& fb, EstimateOptions opts) {
  if (!(fb.cost >= 0.0 && fb.cost <= 1.0)) {
    throw std::invalid_argument("raw cost must be in [0, 1]");
  }
  if (fb.delay < 1) throw std::invalid_argument("delay must be >= 1");
  if (fb.threshold < 1) throw std::invalid_argument("threshold must be >= 1");
  if (!(fb.prob >= 0.0 && fb.prob <= 1.0)) {
    throw std::invalid_argument("acting probability must be in [0, 1]");
  }
  if (fb.delay > fb.threshold) return 0.0;

  double value = fb.cost / static_cast<double>(fb.delay);
  if (opts.importance_weighting) {
    if (fb.prob == 0.0) {
      throw std::invalid_argument("acting probability is zero; snapshot corrupted");
    }
    value /= fb.prob;
  }
  if (opts.cap) value = std::min(value, 1.0);
  return value;
}

CostEstimate estimate_cost(const DelayedFeedback& fb, std::size_t num_actions,
                           EstimateOptions opts) {
  if (fb.action >= num_actions) throw std::out_of_range("feedback action out of range");
  const double v = estimate_cost_value(fb, opts);
  if (fb.delay > fb.threshold) return CostEstimate(num_actions);
  return CostEstimate(num_actions, fb.action, v);
}

void update_weights(WeightState& state, const CostEstimate& est,
                    const AdviceMatrix& advice) {
  if (advice.num_experts() != state.num_experts() ||
      advice.num_actions() != state.num_actions() ||
      est.size() != state.num_actions()) {
    throw std::invalid_argument("dimension mismatch in weight update");
  }
  std::vector<double> costs(state.num_experts());
  for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = est.dot(advice.row(i));
  state.apply_expert_costs(costs);
  state.advance_round();
}

// Closed forms

double optimal_learning_rate(std::size_t num_actions, std::size_t num_experts,
                             std::uint64_t horizon) {
  if (num_actions < 1) throw std::invalid_argument("K must be >= 1");
  if (num_experts < 2) {
    throw std::invalid_argument("optimal learning rate needs at least two experts");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  const double k = static_cast<double>(num_actions);
  const double t = static_cast<double>(horizon);
  return std::min(1.0, std::sqrt(k * std::log(static_cast<double>(num_experts)) / (2.0 * t)));
}

double regret_bound(double eta, std::size_t num_actions, std::size_t num_experts,
                    double horizon, Algorithm algorithm) {
  check_eta(eta);
  const double k_ln_n =
      static_cast<double>(num_actions) * std::log(static_cast<double>(num_experts));
  const double slope = algorithm == Algorithm::exp4 ? std::numbers::e - 1.0 : 2.0;
  return slope * eta * horizon + k_ln_n / eta;
}

double optimal_regret_bound(std::size_t num_actions, std::size_t num_experts,
                            double horizon) {
  return 2.0 * std::sqrt(2.0 * static_cast<double>(num_actions) * horizon *
                         std::log(static_cast<double>(num_experts)));
}

}  // namespace dfdc
