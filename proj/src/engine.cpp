#include "dfdc/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace dfdc {

std::string_view to_string(CostMode m) { return m == CostMode::dfdc ? "dfdc" : "legacy"; }

CostMode parse_cost_mode(std::string_view s) {
  if (s == "dfdc") return CostMode::dfdc;
  if (s == "legacy") return CostMode::legacy;
  throw std::invalid_argument("unknown cost mode: " + std::string(s));
}

void EngineConfig::validate() const {
  if (cache_size < 1) throw std::invalid_argument("cache size must be >= 1");
  if (resolved_history_size() < 1) throw std::invalid_argument("history size must be >= 1");
  switch (learning_rate.mode) {
    case LearningRate::Mode::fixed:
      if (!(learning_rate.eta > 0.0 && learning_rate.eta <= 1.0)) {
        throw std::invalid_argument("fixed learning rate must be in (0, 1]");
      }
      break;
    case LearningRate::Mode::auto_horizon:
      if (learning_rate.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
      break;
    case LearningRate::Mode::auto_stream:
      break;
  }
}

double legacy_cost(std::uint64_t delay, std::size_t cache_size) {
  if (delay < 1) throw std::invalid_argument("delay must be >= 1");
  if (cache_size < 1) throw std::invalid_argument("cache size must be >= 1");
  return std::pow(kLegacyDiscountBase,
                  static_cast<double>(delay) / static_cast<double>(cache_size));
}

double resolve_learning_rate(const LearningRate& lr, std::size_t cache_size,
                             std::uint64_t round) {
  switch (lr.mode) {
    case LearningRate::Mode::fixed:
      return lr.eta;
    case LearningRate::Mode::auto_horizon:
      return optimal_learning_rate(cache_size, kNumCacheExperts, lr.horizon);
    case LearningRate::Mode::auto_stream:
      return optimal_learning_rate(cache_size, kNumCacheExperts,
                                   std::bit_floor(std::max<std::uint64_t>(round, 1)));
  }
  throw std::logic_error("unreachable learning rate mode");
}

namespace {

EngineConfig validated(EngineConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Engine::Engine(EngineConfig cfg)
    : cfg_(validated(std::move(cfg))),
      cache_(cfg_.cache_size),
      history_(cfg_.resolved_history_size()),
      state_(kNumCacheExperts, cfg_.cache_size,
             resolve_learning_rate(cfg_.learning_rate, cfg_.cache_size, 1)),
      rng_(cfg_.seed),
      advice_(kNumCacheExperts, cfg_.cache_size),
      expert_costs_(kNumCacheExperts, 0.0) {}

std::vector<double> Engine::normalized_weights() const {
  const double total = state_.total();
  std::vector<double> q(state_.num_experts());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = state_.weight(i) / total;
  return q;
}

double Engine::feedback_estimate(const HistoryMatch& m) const {
  const EstimateOptions opts{cfg_.importance_weighting, cfg_.cap};
  DelayedFeedback fb;
  fb.action = m.record.action;
  fb.delay = m.delay;
  fb.threshold = history_.capacity();
  fb.prob = m.record.prob;
  if (cfg_.cost_mode == CostMode::dfdc) {
    fb.cost = 1.0;
    return estimate_cost_value(fb, opts);
  }
  // Legacy: the decayed value replaces x / d; weighting and cap still apply.
  double v = legacy_cost(m.delay, cfg_.cache_size);
  if (opts.importance_weighting) {
    if (fb.prob == 0.0) throw std::invalid_argument("acting probability is zero");
    v /= fb.prob;
  }
  if (opts.cap) v = std::min(v, 1.0);
  return v;
}

bool Engine::step_impl(std::string_view key, std::uint64_t round, RequestOutcome* out) {
  if (cfg_.learning_rate.mode == LearningRate::Mode::auto_stream) {
    const auto epoch = static_cast<std::size_t>(std::bit_width(std::max<std::uint64_t>(round, 1)));
    if (epoch != stream_epoch_) {
      stream_epoch_ = epoch;
      state_.set_eta(resolve_learning_rate(cfg_.learning_rate, cfg_.cache_size, round));
    }
  }
  if (out) {
    out->round = round;
    out->key = std::string(key);
  }

  if (cache_.access(key, round) == AccessResult::hit) {
    state_.advance_round();
    if (out) {
      out->hit = true;
      out->weights_after.assign(state_.weights().begin(), state_.weights().end());
    }
    return true;
  }

  auto match = history_.take(key);

  // Victim is drawn with the weights in effect before this round's feedback.
  std::optional<std::size_t> victim;
  double victim_prob = 1.0;
  std::size_t lru = 0;
  std::size_t lfu = 0;
  if (cache_.full()) {
    lru = lru_advise(cache_);
    lfu = lfu_advise(cache_);
    advice_.set_one_hot(static_cast<std::size_t>(Expert::lru), lru);
    advice_.set_one_hot(static_cast<std::size_t>(Expert::lfu), lfu);
    mix_distribution(state_.weights(), advice_, state_.eta(), probs_);
    victim = sample_action(probs_, rng_);
    victim_prob = probs_[*victim];
  }

  if (match) {
    const double est = feedback_estimate(*match);
    for (std::size_t i = 0; i < expert_costs_.size(); ++i) {
      expert_costs_[i] = est * match->record.expert_match[i];
    }
    state_.apply_expert_costs(expert_costs_);
    if (out) out->feedback = AppliedFeedback{std::string(key), match->delay, est, expert_costs_};
  }

  if (victim) {
    EvictionRecord rec;
    rec.key = cache_.entry(*victim).key;
    rec.round_evicted = round;
    rec.expert_match = {lru == *victim ? 1.0 : 0.0, lfu == *victim ? 1.0 : 0.0};
    rec.action = *victim;
    rec.prob = victim_prob;
    if (out) out->evicted = rec.key;
    cache_.insert_into_slot(key, *victim, round);
    history_.record(std::move(rec));
  } else {
    cache_.insert_with_eviction(key, std::nullopt, round);
  }

  state_.advance_round();
  if (out) out->weights_after.assign(state_.weights().begin(), state_.weights().end());
  return false;
}

RequestOutcome Engine::process_request(std::string_view key, std::uint64_t round) {
  RequestOutcome out;
  step_impl(key, round, &out);
  return out;
}

bool Engine::step(std::string_view key, std::uint64_t round) {
  return step_impl(key, round, nullptr);
}

MetricsSeries run_trace(Engine& engine, std::span<const std::string> keys) {
  if (keys.empty()) throw std::invalid_argument("empty trace");
  MetricsSeries m;
  m.round_costs.reserve(keys.size());
  const std::uint64_t horizon = keys.size();
  const std::uint64_t interval = sampling_interval(horizon);
  const std::uint64_t first_round = engine.weights().round();
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    const bool hit = engine.step(keys[t - 1], first_round + t - 1);
    m.round_costs.push_back(hit ? 0.0 : 1.0);
    if (hit) {
      ++m.hits;
    } else {
      ++m.misses;
    }
    if (t % interval == 0 || t == horizon) {
      m.sample_rounds.push_back(t);
      m.sample_weights.push_back(engine.normalized_weights());
    }
  }
  return m;
}

}  // namespace dfdc
