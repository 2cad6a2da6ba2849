#pragma once

// Workloads and measurement: synthetic bandit environments, request traces,
// the best-expert-in-hindsight baseline, empirical regret and the replicated
// experiment runner.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dfdc/bandit.hpp"
#include "dfdc/cache.hpp"
#include "dfdc/engine.hpp"
#include "dfdc/metrics.hpp"

namespace dfdc {

// ---------------------------------------------------------------------------
// Bandit environments

enum class EnvKind { stochastic, switching };

std::string_view to_string(EnvKind k);
EnvKind parse_env_kind(std::string_view s);

struct DelayModel {
  enum class Kind { fixed, uniform };
  Kind kind = Kind::uniform;
  std::uint64_t fixed_delay = 1;  // used when kind == fixed
  std::uint64_t max_delay = 1;    // delays uniform in [1, max_delay]

  static DelayModel fixed(std::uint64_t d) { return {Kind::fixed, d, d}; }
  static DelayModel uniform(std::uint64_t m) { return {Kind::uniform, 1, m}; }
};

struct EnvironmentSpec {
  EnvKind kind = EnvKind::stochastic;
  std::size_t arms = 0;
  // Mean cost per arm, one vector per segment. Segment 0 starts at round 1,
  // segment k at switch_rounds[k - 1]. Stochastic environments use exactly one
  // segment.
  std::vector<std::vector<double>> means;
  std::vector<std::uint64_t> switch_rounds;
  DelayModel delay;
  std::uint64_t threshold = 1;  // m: feedback with d > m is dropped

  // Throws std::invalid_argument.
  void validate() const;
};

/// Oblivious cost process. Every draw is a pure function of
/// (seed, round, arm), so the costs exist independently of what is played.
class BanditEnvironment {
 public:
  BanditEnvironment(EnvironmentSpec spec, std::uint64_t seed);

  const EnvironmentSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t arms() const { return spec_.arms; }
  std::uint64_t threshold() const { return spec_.threshold; }

  double mean(std::uint64_t round, std::size_t arm) const;
  // Bernoulli(mean) draw in {0, 1}.
  double cost(std::uint64_t round, std::size_t arm) const;
  // Delay of any feedback generated at `round`.
  std::uint64_t delay(std::uint64_t round) const;

  // What playing `arm` at `round` costs under `algorithm`: the raw draw for
  // exp4, the draw divided by the delay (zero past the threshold) for dfdc.
  double incurred_cost(std::uint64_t round, std::size_t arm, Algorithm algorithm) const;

 private:
  std::size_t segment(std::uint64_t round) const;

  EnvironmentSpec spec_;
  std::uint64_t seed_;
};

BanditEnvironment gen_environment(const EnvironmentSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Traces

enum class TraceSource { file, synthetic };

struct Trace {
  std::vector<std::string> keys;
  TraceSource source = TraceSource::synthetic;

  std::size_t size() const { return keys.size(); }
};

class TraceError : public std::runtime_error {
 public:
  enum class Kind { missing_file, empty_trace, column_out_of_range };
  TraceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TraceFormat {
  enum class Kind { lines, csv };
  Kind kind = Kind::lines;
  std::size_t column = 0;    // csv: 0-based key column
  bool skip_header = false;  // csv: drop the first row
};

// lines: one key per non-empty line, '#' lines skipped.
// csv: key from `column` of each comma-separated row.
Trace parse_trace(const std::filesystem::path& path, const TraceFormat& format = {});

struct Phase {
  enum class Kind {
    recency,    // looping scan over `alphabet` keys
    frequency,  // Zipf(s) draws over a hot set of `alphabet` keys
  };
  Kind kind = Kind::frequency;
  std::size_t length = 0;
  std::size_t alphabet = 1;
  double zipf_exponent = 1.0;
};

// Frequency phases share one key namespace ("h<i>"), scan phases another
// ("s<i>"), so a hot set stays hot across intervening scans.
struct PhaseTraceSpec {
  std::vector<Phase> phases;

  void validate() const;
};

// "freq:LEN:ALPHA[:S],scan:LEN:ALPHA,...". Throws std::invalid_argument.
PhaseTraceSpec parse_phase_spec(std::string_view text);
std::string to_string(const PhaseTraceSpec& spec);

Trace gen_phase_trace(const PhaseTraceSpec& spec, std::uint64_t seed);

// Phase workload used by the adaptivity check: hot-set phases interleaved
// with scans that flush an LRU cache of `cache_size` pages.
PhaseTraceSpec default_phase_spec(std::size_t cache_size);

// ---------------------------------------------------------------------------
// Best expert and regret

struct BestExpert {
  std::size_t expert = 0;
  double cost = 0.0;
  // Cumulative cost of each expert through the final round.
  std::vector<double> expert_costs;
  // min over experts of the cumulative cost through round t (index t - 1).
  std::vector<double> prefix;
};

// A pure LRU or LFU cache replaying `keys` standalone.
MetricsSeries simulate_policy(std::span<const std::string> keys, std::size_t cache_size,
                              Expert expert);

BestExpert best_expert_cost(std::span<const std::string> keys, std::size_t cache_size,
                            std::span<const Expert> experts);

// Experts are fixed-arm recommenders: expert i always advises expert_arms[i].
BestExpert best_expert_cost(const BanditEnvironment& env,
                            std::span<const std::size_t> expert_arms, std::uint64_t horizon,
                            Algorithm algorithm);

struct RegretSeries {
  std::vector<double> prefix;  // C_A(t) - C_best(t)
  double final_value = 0.0;
};

// Regret is reported as C_A - C_best, so positive means worse than the best
// expert.
double empirical_regret(const MetricsSeries& run, double c_best);
RegretSeries empirical_regret(const MetricsSeries& run, std::span<const double> best_prefix);

// ---------------------------------------------------------------------------
// Bandit experiments

struct BanditRunConfig {
  EnvironmentSpec env;
  std::vector<std::size_t> expert_arms;
  std::uint64_t horizon = 0;
  std::optional<double> eta;  // nullopt: optimal rate for (K, N, horizon)
  Algorithm algorithm = Algorithm::exp4_dfdc;
  EstimateOptions estimate{true, false};

  double resolved_eta() const;
  void validate() const;
};

struct BanditRun {
  std::uint64_t seed = 0;
  double eta = 0.0;
  MetricsSeries metrics;   // round_costs hold incurred (decayed) costs
  double raw_cost = 0.0;   // sum of undecayed draws of the played arms
  BestExpert best;
  RegretSeries regret;
};

// One seeded run of the exponential-weights learner against `cfg.env`.
BanditRun run_bandit(const BanditRunConfig& cfg, std::uint64_t seed);

struct ExperimentConfig {
  BanditRunConfig run;
  std::vector<std::uint64_t> seeds;
  unsigned threads = 1;
};

struct CurvePoint {
  std::uint64_t round = 0;
  double mean_cost = 0.0;
  double mean_best = 0.0;
  double mean_regret = 0.0;
  double sd_regret = 0.0;
  double se_regret = 0.0;
  double bound = 0.0;  // closed-form bound at this prefix with the run's eta
  std::vector<double> mean_weights;
};

struct ExperimentReport {
  double eta = 0.0;
  std::vector<BanditRun> runs;  // ordered by seed
  std::vector<CurvePoint> curve;
  double mean_final_regret = 0.0;
  double sd_final_regret = 0.0;
  double se_final_regret = 0.0;
  double final_bound = 0.0;    // regret_bound(eta, K, N, T)
  double optimal_bound = 0.0;  // 2 sqrt(2 K T ln N)
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Cache runs

enum class CachePolicy { lru, lfu, lecar, olecar };

std::string_view to_string(CachePolicy p);
CachePolicy parse_cache_policy(std::string_view s);

struct CacheRun {
  CachePolicy policy = CachePolicy::lru;
  std::optional<double> eta;  // initial eta for learned policies
  MetricsSeries metrics;
};

// LRU/LFU replay standalone; LeCaR/OLeCaR run the engine with `engine_cfg`.
CacheRun run_cache_policy(std::span<const std::string> keys, CachePolicy policy,
                          const EngineConfig& engine_cfg);

}  // namespace dfdc
