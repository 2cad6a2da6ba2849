#include "dfdc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <utility>

#include "dfdc/rng.hpp"

namespace dfdc {

namespace {

// Stream tags keep the per-(seed, round, arm) draws of different quantities
// independent of each other.
constexpr std::uint64_t kCostStream = 0xc057;
constexpr std::uint64_t kDelayStream = 0xde1a;
constexpr std::uint64_t kActionStream = 0xac71;
constexpr std::uint64_t kTraceStream = 0x7ace;

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::uint64_t parse_uint(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, const char* what) {
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" + std::string(s) + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Environments

std::string_view to_string(EnvKind k) {
  return k == EnvKind::stochastic ? "stochastic" : "switching";
}

EnvKind parse_env_kind(std::string_view s) {
  if (s == "stochastic") return EnvKind::stochastic;
  if (s == "switching") return EnvKind::switching;
  throw std::invalid_argument("unknown environment: " + std::string(s));
}

void EnvironmentSpec::validate() const {
  if (arms < 1) throw std::invalid_argument("environment needs at least one arm");
  if (means.empty()) throw std::invalid_argument("environment needs mean costs");
  if (kind == EnvKind::stochastic && means.size() != 1) {
    throw std::invalid_argument("stochastic environment takes a single mean vector");
  }
  if (means.size() != switch_rounds.size() + 1) {
    throw std::invalid_argument("need one mean vector per segment");
  }
  for (const auto& seg : means) {
    if (seg.size() != arms) throw std::invalid_argument("mean vector length must equal arms");
    for (double m : seg) {
      if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("means must lie in [0, 1]");
    }
  }
  for (std::size_t i = 0; i < switch_rounds.size(); ++i) {
    if (switch_rounds[i] < 2 || (i > 0 && switch_rounds[i] <= switch_rounds[i - 1])) {
      throw std::invalid_argument("switch rounds must be > 1 and strictly increasing");
    }
  }
  if (delay.kind == DelayModel::Kind::fixed && delay.fixed_delay < 1) {
    throw std::invalid_argument("fixed delay must be >= 1");
  }
  if (delay.kind == DelayModel::Kind::uniform && delay.max_delay < 1) {
    throw std::invalid_argument("maximum delay must be >= 1");
  }
  if (threshold < 1) throw std::invalid_argument("delay threshold must be >= 1");
}

BanditEnvironment::BanditEnvironment(EnvironmentSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
}

BanditEnvironment gen_environment(const EnvironmentSpec& spec, std::uint64_t seed) {
  return BanditEnvironment(spec, seed);
}

std::size_t BanditEnvironment::segment(std::uint64_t round) const {
  const auto it = std::upper_bound(spec_.switch_rounds.begin(), spec_.switch_rounds.end(), round);
  return static_cast<std::size_t>(it - spec_.switch_rounds.begin());
}

double BanditEnvironment::mean(std::uint64_t round, std::size_t arm) const {
  return spec_.means[segment(round)].at(arm);
}

double BanditEnvironment::cost(std::uint64_t round, std::size_t arm) const {
  const double u = to_unit(hash_combine(seed_, kCostStream, round, arm));
  return u < mean(round, arm) ? 1.0 : 0.0;
}

std::uint64_t BanditEnvironment::delay(std::uint64_t round) const {
  if (spec_.delay.kind == DelayModel::Kind::fixed) return spec_.delay.fixed_delay;
  const std::uint64_t bits = hash_combine(seed_, kDelayStream, round);
  // Modulo bias is at most max_delay / 2^64.
  return 1 + bits % spec_.delay.max_delay;
}

double BanditEnvironment::incurred_cost(std::uint64_t round, std::size_t arm,
                                        Algorithm algorithm) const {
  const double x = cost(round, arm);
  if (algorithm == Algorithm::exp4) return x;
  const std::uint64_t d = delay(round);
  return d > spec_.threshold ? 0.0 : x / static_cast<double>(d);
}

// ---------------------------------------------------------------------------
// Traces

Trace parse_trace(const std::filesystem::path& path, const TraceFormat& format) {
  std::ifstream in(path);
  if (!in) throw TraceError(TraceError::Kind::missing_file, "cannot open trace: " + path.string());

  Trace trace;
  trace.source = TraceSource::file;
  std::string line;
  bool first_row = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = strip_cr(line);
    if (format.kind == TraceFormat::Kind::lines) {
      if (view.empty() || view.front() == '#') continue;
      trace.keys.emplace_back(view);
      continue;
    }
    if (view.empty()) continue;
    if (first_row && format.skip_header) {
      first_row = false;
      continue;
    }
    first_row = false;
    const auto fields = split(view, ',');
    if (format.column >= fields.size()) {
      throw TraceError(TraceError::Kind::column_out_of_range,
                       "column " + std::to_string(format.column) + " out of range on line " +
                           std::to_string(line_no) + " of " + path.string());
    }
    trace.keys.emplace_back(fields[format.column]);
  }
  if (trace.keys.empty()) {
    throw TraceError(TraceError::Kind::empty_trace, "empty trace: " + path.string());
  }
  return trace;
}

void PhaseTraceSpec::validate() const {
  if (phases.empty()) throw std::invalid_argument("phase spec has no phases");
  for (const Phase& p : phases) {
    if (p.length < 1) throw std::invalid_argument("phase length must be >= 1");
    if (p.alphabet < 1) throw std::invalid_argument("phase alphabet must be >= 1");
    if (!(p.zipf_exponent >= 0.0) || !std::isfinite(p.zipf_exponent)) {
      throw std::invalid_argument("zipf exponent must be finite and >= 0");
    }
  }
}

PhaseTraceSpec parse_phase_spec(std::string_view text) {
  PhaseTraceSpec spec;
  for (std::string_view token : split(text, ',')) {
    const auto parts = split(token, ':');
    if (parts.size() < 3) throw std::invalid_argument("bad phase '" + std::string(token) + "'");
    Phase p;
    if (parts[0] == "freq") {
      p.kind = Phase::Kind::frequency;
      if (parts.size() > 4) throw std::invalid_argument("bad phase '" + std::string(token) + "'");
      if (parts.size() == 4) p.zipf_exponent = parse_double(parts[3], "zipf exponent");
    } else if (parts[0] == "scan") {
      p.kind = Phase::Kind::recency;
      if (parts.size() != 3) throw std::invalid_argument("bad phase '" + std::string(token) + "'");
    } else {
      throw std::invalid_argument("unknown phase kind '" + std::string(parts[0]) + "'");
    }
    p.length = parse_uint(parts[1], "phase length");
    p.alphabet = parse_uint(parts[2], "phase alphabet");
    spec.phases.push_back(p);
  }
  spec.validate();
  return spec;
}

std::string to_string(const PhaseTraceSpec& spec) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < spec.phases.size(); ++i) {
    const Phase& p = spec.phases[i];
    if (i) os << ',';
    if (p.kind == Phase::Kind::frequency) {
      os << "freq:" << p.length << ':' << p.alphabet << ':' << p.zipf_exponent;
    } else {
      os << "scan:" << p.length << ':' << p.alphabet;
    }
  }
  return os.str();
}

Trace gen_phase_trace(const PhaseTraceSpec& spec, std::uint64_t seed) {
  spec.validate();
  Trace trace;
  trace.source = TraceSource::synthetic;
  std::size_t total = 0;
  for (const Phase& p : spec.phases) total += p.length;
  trace.keys.reserve(total);

  for (std::size_t idx = 0; idx < spec.phases.size(); ++idx) {
    const Phase& p = spec.phases[idx];
    if (p.kind == Phase::Kind::recency) {
      for (std::size_t i = 0; i < p.length; ++i) {
        trace.keys.push_back("s" + std::to_string(i % p.alphabet));
      }
      continue;
    }
    std::vector<double> cdf(p.alphabet);
    double acc = 0.0;
    for (std::size_t r = 0; r < p.alphabet; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), p.zipf_exponent);
      cdf[r] = acc;
    }
    Rng rng(hash_combine(seed, kTraceStream, idx));
    for (std::size_t i = 0; i < p.length; ++i) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      trace.keys.push_back("h" + std::to_string(it - cdf.begin()));
    }
  }
  return trace;
}

PhaseTraceSpec default_phase_spec(std::size_t cache_size) {
  const std::size_t c = std::max<std::size_t>(cache_size, 2);
  PhaseTraceSpec spec;
  for (int rep = 0; rep < 4; ++rep) {
    spec.phases.push_back({Phase::Kind::frequency, 400 * c, 2 * c, 1.0});
    spec.phases.push_back({Phase::Kind::recency, 3 * c, c + c / 2, 1.0});
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Best expert and regret

MetricsSeries simulate_policy(std::span<const std::string> keys, std::size_t cache_size,
                              Expert expert) {
  CacheState cache(cache_size);
  MetricsSeries m;
  m.round_costs.reserve(keys.size());
  std::uint64_t round = 0;
  for (const std::string& key : keys) {
    ++round;
    if (cache.access(key, round) == AccessResult::hit) {
      ++m.hits;
      m.round_costs.push_back(0.0);
      continue;
    }
    ++m.misses;
    m.round_costs.push_back(1.0);
    if (cache.full()) {
      cache.insert_into_slot(key, advise(cache, expert), round);
    } else {
      cache.insert_with_eviction(key, std::nullopt, round);
    }
  }
  return m;
}

namespace {

BestExpert pick_best(const std::vector<std::vector<double>>& per_round) {
  BestExpert best;
  const std::size_t rounds = per_round.empty() ? 0 : per_round.front().size();
  std::vector<double> cum(per_round.size(), 0.0);
  best.prefix.resize(rounds);
  for (std::size_t t = 0; t < rounds; ++t) {
    double lo = 0.0;
    for (std::size_t i = 0; i < per_round.size(); ++i) {
      cum[i] += per_round[i][t];
      if (i == 0 || cum[i] < lo) lo = cum[i];
    }
    best.prefix[t] = lo;
  }
  best.expert_costs = cum;
  for (std::size_t i = 1; i < cum.size(); ++i) {
    if (cum[i] < cum[best.expert]) best.expert = i;
  }
  best.cost = cum.empty() ? 0.0 : cum[best.expert];
  return best;
}

}  // namespace

BestExpert best_expert_cost(std::span<const std::string> keys, std::size_t cache_size,
                            std::span<const Expert> experts) {
  if (experts.empty()) throw std::invalid_argument("need at least one expert");
  std::vector<std::vector<double>> per_round;
  for (Expert e : experts) per_round.push_back(simulate_policy(keys, cache_size, e).round_costs);
  return pick_best(per_round);
}

BestExpert best_expert_cost(const BanditEnvironment& env,
                            std::span<const std::size_t> expert_arms, std::uint64_t horizon,
                            Algorithm algorithm) {
  if (expert_arms.empty()) throw std::invalid_argument("need at least one expert");
  std::vector<std::vector<double>> per_round(expert_arms.size());
  for (std::size_t i = 0; i < expert_arms.size(); ++i) {
    if (expert_arms[i] >= env.arms()) throw std::invalid_argument("expert arm out of range");
    per_round[i].resize(horizon);
    for (std::uint64_t t = 1; t <= horizon; ++t) {
      per_round[i][t - 1] = env.incurred_cost(t, expert_arms[i], algorithm);
    }
  }
  return pick_best(per_round);
}

double empirical_regret(const MetricsSeries& run, double c_best) {
  return run.total_cost() - c_best;
}

RegretSeries empirical_regret(const MetricsSeries& run, std::span<const double> best_prefix) {
  if (best_prefix.size() != run.round_costs.size()) {
    throw std::invalid_argument("best-expert prefix length does not match run length");
  }
  RegretSeries r;
  r.prefix.resize(best_prefix.size());
  double cum = 0.0;
  for (std::size_t t = 0; t < best_prefix.size(); ++t) {
    cum += run.round_costs[t];
    r.prefix[t] = cum - best_prefix[t];
  }
  r.final_value = r.prefix.empty() ? 0.0 : r.prefix.back();
  return r;
}

// ---------------------------------------------------------------------------
// Bandit experiments

double BanditRunConfig::resolved_eta() const {
  if (eta) return *eta;
  return optimal_learning_rate(env.arms, expert_arms.size(), horizon);
}

void BanditRunConfig::validate() const {
  env.validate();
  if (expert_arms.empty()) throw std::invalid_argument("need at least one expert");
  for (std::size_t a : expert_arms) {
    if (a >= env.arms) throw std::invalid_argument("expert arm out of range");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (eta && !(*eta > 0.0 && *eta <= 1.0)) {
    throw std::invalid_argument("learning rate must be in (0, 1]");
  }
  if (!eta && expert_arms.size() < 2) {
    throw std::invalid_argument("automatic learning rate needs at least two experts");
  }
}

BanditRun run_bandit(const BanditRunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const BanditEnvironment env(cfg.env, seed);
  const std::size_t k = env.arms();
  const std::size_t n = cfg.expert_arms.size();

  BanditRun run;
  run.seed = seed;
  run.eta = cfg.resolved_eta();

  WeightState state(n, k, run.eta);
  AdviceMatrix advice(n, k);
  for (std::size_t i = 0; i < n; ++i) advice.set_one_hot(i, cfg.expert_arms[i]);

  struct Pending {
    std::size_t action;
    double cost;
    std::uint64_t delay;
    double prob;
  };
  // Arrival round -> feedback, in order of the round the action was taken.
  std::multimap<std::uint64_t, Pending> pending;

  Rng rng(hash_combine(seed, kActionStream));
  std::vector<double> probs;
  std::vector<double> costs(n);
  const std::uint64_t interval = sampling_interval(cfg.horizon);
  const std::uint64_t threshold = cfg.algorithm == Algorithm::exp4 ? 1 : env.threshold();

  auto deliver = [&](const Pending& p) {
    DelayedFeedback fb{p.action, p.cost, p.delay, threshold, p.prob};
    const CostEstimate est = estimate_cost(fb, k, cfg.estimate);
    for (std::size_t i = 0; i < n; ++i) costs[i] = est.dot(advice.row(i));
    state.apply_expert_costs(costs);
  };

  run.metrics.round_costs.reserve(cfg.horizon);
  for (std::uint64_t t = 1; t <= cfg.horizon; ++t) {
    mix_distribution(state.weights(), advice, state.eta(), probs);
    const std::size_t a = sample_action(probs, rng);
    const double x = env.cost(t, a);
    run.raw_cost += x;
    run.metrics.round_costs.push_back(env.incurred_cost(t, a, cfg.algorithm));

    if (cfg.algorithm == Algorithm::exp4) {
      deliver({a, x, 1, probs[a]});
    } else {
      const std::uint64_t d = env.delay(t);
      if (d <= threshold) pending.emplace(t + d, Pending{a, x, d, probs[a]});
    }
    const auto [first, last] = pending.equal_range(t);
    for (auto it = first; it != last; ++it) deliver(it->second);
    pending.erase(first, last);
    state.advance_round();

    if (t % interval == 0 || t == cfg.horizon) {
      const double total = state.total();
      std::vector<double> q(n);
      for (std::size_t i = 0; i < n; ++i) q[i] = state.weight(i) / total;
      run.metrics.sample_rounds.push_back(t);
      run.metrics.sample_weights.push_back(std::move(q));
    }
  }

  run.best = best_expert_cost(env, cfg.expert_arms, cfg.horizon, cfg.algorithm);
  run.regret = empirical_regret(run.metrics, run.best.prefix);
  return run;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.run.validate();
  if (cfg.seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");

  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());

  ExperimentReport rep;
  rep.eta = cfg.run.resolved_eta();
  rep.runs.resize(seeds.size());

  const unsigned workers = std::clamp<unsigned>(cfg.threads, 1, static_cast<unsigned>(seeds.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) rep.runs[i] = run_bandit(cfg.run, seeds[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < seeds.size(); i = next++) {
            rep.runs[i] = run_bandit(cfg.run, seeds[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const std::size_t k = cfg.run.env.arms;
  const std::size_t n = cfg.run.expert_arms.size();
  const auto count = static_cast<double>(rep.runs.size());

  std::vector<std::vector<double>> cum_costs;
  for (const BanditRun& r : rep.runs) cum_costs.push_back(r.metrics.cumulative());

  const auto& rounds = rep.runs.front().metrics.sample_rounds;
  for (std::size_t s = 0; s < rounds.size(); ++s) {
    CurvePoint pt;
    pt.round = rounds[s];
    const std::size_t idx = pt.round - 1;
    pt.mean_weights.assign(n, 0.0);
    for (std::size_t r = 0; r < rep.runs.size(); ++r) {
      const BanditRun& run = rep.runs[r];
      pt.mean_cost += cum_costs[r][idx];
      pt.mean_best += run.best.prefix[idx];
      pt.mean_regret += run.regret.prefix[idx];
      for (std::size_t i = 0; i < n; ++i) pt.mean_weights[i] += run.metrics.sample_weights[s][i];
    }
    pt.mean_cost /= count;
    pt.mean_best /= count;
    pt.mean_regret /= count;
    for (double& w : pt.mean_weights) w /= count;
    if (rep.runs.size() > 1) {
      double ss = 0.0;
      for (const BanditRun& run : rep.runs) {
        const double dev = run.regret.prefix[idx] - pt.mean_regret;
        ss += dev * dev;
      }
      pt.sd_regret = std::sqrt(ss / (count - 1.0));
      pt.se_regret = pt.sd_regret / std::sqrt(count);
    }
    pt.bound = regret_bound(rep.eta, k, n, static_cast<double>(pt.round), cfg.run.algorithm);
    rep.curve.push_back(std::move(pt));
  }

  const CurvePoint& last = rep.curve.back();
  rep.mean_final_regret = last.mean_regret;
  rep.sd_final_regret = last.sd_regret;
  rep.se_final_regret = last.se_regret;
  rep.final_bound = last.bound;
  rep.optimal_bound = n >= 2 ? optimal_regret_bound(k, n, static_cast<double>(cfg.run.horizon)) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Cache runs

std::string_view to_string(CachePolicy p) {
  switch (p) {
    case CachePolicy::lru:
      return "lru";
    case CachePolicy::lfu:
      return "lfu";
    case CachePolicy::lecar:
      return "lecar";
    case CachePolicy::olecar:
      return "olecar";
  }
  return "unknown";
}

CachePolicy parse_cache_policy(std::string_view s) {
  if (s == "lru") return CachePolicy::lru;
  if (s == "lfu") return CachePolicy::lfu;
  if (s == "lecar") return CachePolicy::lecar;
  if (s == "olecar") return CachePolicy::olecar;
  throw std::invalid_argument("unknown policy: " + std::string(s));
}

CacheRun run_cache_policy(std::span<const std::string> keys, CachePolicy policy,
                          const EngineConfig& engine_cfg) {
  if (keys.empty()) throw std::invalid_argument("empty trace");
  CacheRun run;
  run.policy = policy;
  switch (policy) {
    case CachePolicy::lru:
      run.metrics = simulate_policy(keys, engine_cfg.cache_size, Expert::lru);
      break;
    case CachePolicy::lfu:
      run.metrics = simulate_policy(keys, engine_cfg.cache_size, Expert::lfu);
      break;
    case CachePolicy::lecar:
    case CachePolicy::olecar: {
      Engine engine(engine_cfg);
      run.eta = engine.eta();
      run.metrics = run_trace(engine, keys);
      break;
    }
  }
  return run;
}

}  // namespace dfdc
