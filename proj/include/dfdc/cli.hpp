#pragma once

// Command-line front end: cache-sim, bandit-sim, sweep and replay.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace dfdc::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kTraceIo = 3,
};

// Run options. Output destination and format are not part of a run's
// configuration and live outside these structs.
struct CacheSimOptions {
  std::string trace;
  std::string synthetic;  // phase spec, or "default"
  std::string trace_format = "lines";
  std::size_t csv_column = 0;
  bool csv_header = false;
  std::size_t cache_size = 0;
  std::string policy = "olecar";
  std::string learning_rate;  // FLOAT | auto | auto-stream; empty = policy default
  std::size_t history_size = 0;
  std::string cost_mode;  // dfdc | legacy; empty = policy default
  std::string importance_weighting = "off";
  std::string cap = "off";
  std::uint64_t seed = 1;
  bool series = true;
};

struct BanditSimOptions {
  std::size_t arms = 10;
  std::size_t experts = 4;
  std::uint64_t horizon = 10000;
  std::string env = "stochastic";
  std::vector<double> means;  // empty: arm 1 at 0.1, all others at 0.5
  std::vector<std::uint64_t> switch_at;  // switching env; empty: horizon / 2
  std::string delay_model = "uniform";
  std::uint64_t delay_max = 20;
  std::uint64_t threshold = 0;  // 0: same as delay_max
  std::string learning_rate = "auto";
  std::string algorithm = "exp4-dfdc";
  std::string importance_weighting = "on";
  std::string cap = "off";
  std::uint64_t seeds = 1;
  std::uint64_t seed_base = 1;
  unsigned threads = 1;
  bool series = true;
};

struct SweepOptions {
  std::string target = "cache";  // cache | bandit
  std::string param = "learning-rate";
  std::vector<std::string> values;
  CacheSimOptions cache;
  BanditSimOptions bandit;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CacheSimOptions, trace, synthetic, trace_format,
                                                csv_column, csv_header, cache_size, policy,
                                                learning_rate, history_size, cost_mode,
                                                importance_weighting, cap, seed, series)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BanditSimOptions, arms, experts, horizon, env,
                                                means, switch_at, delay_model, delay_max,
                                                threshold, learning_rate, algorithm,
                                                importance_weighting, cap, seeds, seed_base,
                                                threads, series)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepOptions, target, param, values, cache,
                                                bandit)

/// In-memory report. `config` echoes every option plus resolved values;
/// `summary` holds one row per policy, seed or sweep value; `series` holds one
/// block of plot-ready arrays per run (empty when not requested).
struct Report {
  nlohmann::ordered_json config;
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  nlohmann::ordered_json series = nlohmann::ordered_json::array();
  std::vector<std::string> summary_columns;
};

// Builders. Throw std::invalid_argument on bad options and dfdc::TraceError on
// trace input problems.
Report cache_sim(const CacheSimOptions& opts);
Report bandit_sim(const BanditSimOptions& opts);
Report sweep(const SweepOptions& opts);
// Re-runs the command recorded in a report's config echo.
Report replay(const nlohmann::ordered_json& config);

std::string to_json_text(const Report& report, bool timestamp);
std::string summary_csv(const Report& report);
std::string series_csv(const nlohmann::ordered_json& block);

// Writes `report` to `out` (stdout when empty) in `format`. CSV series go to
// "<stem>.series.csv" (one block) or "<stem>.<label>.series.csv" next to the
// summary file.
void write_report(const Report& report, const std::string& out, const std::string& format,
                  bool timestamp, std::ostream& stdout_stream);

// 17 significant digits, so every double round-trips exactly.
std::string format_number(double v);

// Full command line without the program name. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dfdc::cli
