#include "dfdc/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include <CLI11.hpp>

#include "dfdc/bandit.hpp"
#include "dfdc/engine.hpp"
#include "dfdc/harness.hpp"
#include "dfdc/rng.hpp"

#ifndef DFDC_VERSION
#define DFDC_VERSION "0.0.0"
#endif

namespace dfdc::cli {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kVersion = DFDC_VERSION;
constexpr std::string_view kRegretConvention =
    "regret = C_A - C_best; positive means worse than the best expert";

bool parse_switch(const std::string& s, const char* flag) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw std::invalid_argument(std::string(flag) + " must be on or off, got '" + s + "'");
}

double parse_eta(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc{} || ptr != end) {
    throw std::invalid_argument("bad learning rate: '" + s + "'");
  }
  if (!(v > 0.0 && v <= 1.0)) {
    throw std::invalid_argument("learning rate must be in (0, 1], got '" + s + "'");
  }
  return v;
}

ojson base_config(std::string_view command, ojson options) {
  ojson c;
  c["command"] = command;
  c["version"] = kVersion;
  c["rng"] = kRngAlgorithm;
  c["regret_convention"] = kRegretConvention;
  c["options"] = std::move(options);
  c["resolved"] = ojson::object();
  return c;
}

// Option structs serialize through nlohmann::json; the round trip through
// text is exact for every value they hold.
template <typename T>
ojson echo(const T& options) {
  return ojson::parse(nlohmann::json(options).dump());
}

template <typename T>
T from_echo(const ojson& j) {
  return nlohmann::json::parse(j.dump()).get<T>();
}

ojson nullable(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::vector<std::uint64_t> sample_rounds(std::uint64_t horizon) {
  std::vector<std::uint64_t> out;
  const std::uint64_t interval = sampling_interval(horizon);
  for (std::uint64_t t = interval; t <= horizon; t += interval) out.push_back(t);
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

// ---------------------------------------------------------------------------
// cache-sim

bool is_learned(CachePolicy p) { return p == CachePolicy::lecar || p == CachePolicy::olecar; }

Trace load_trace(const CacheSimOptions& o) {
  if (o.trace.empty() == o.synthetic.empty()) {
    throw std::invalid_argument("exactly one of --trace or --synthetic is required");
  }
  if (!o.trace.empty()) {
    TraceFormat fmt;
    if (o.trace_format == "csv") {
      fmt.kind = TraceFormat::Kind::csv;
    } else if (o.trace_format != "lines") {
      throw std::invalid_argument("unknown trace format: " + o.trace_format);
    }
    fmt.column = o.csv_column;
    fmt.skip_header = o.csv_header;
    return parse_trace(o.trace, fmt);
  }
  const PhaseTraceSpec spec =
      o.synthetic == "default" ? default_phase_spec(o.cache_size) : parse_phase_spec(o.synthetic);
  return gen_phase_trace(spec, o.seed);
}

LearningRate learning_rate_for(const std::string& text, std::uint64_t trace_length) {
  if (text == "auto") return LearningRate::for_horizon(trace_length);
  if (text == "auto-stream") return LearningRate::stream();
  return LearningRate::fixed(parse_eta(text));
}

// LeCaR defaults to the legacy reproduction settings, OLeCaR to the decaying
// cost with the rate tuned to the trace length. Explicit flags win for both.
EngineConfig engine_config(const CacheSimOptions& o, CachePolicy policy,
                           std::uint64_t trace_length) {
  const bool legacy = policy == CachePolicy::lecar;
  EngineConfig c;
  c.cache_size = o.cache_size;
  c.history_size = o.history_size;
  c.seed = o.seed;
  c.importance_weighting = parse_switch(o.importance_weighting, "--importance-weighting");
  c.cap = parse_switch(o.cap, "--cap");
  if (o.learning_rate.empty()) {
    c.learning_rate = legacy ? LearningRate::fixed(kLegacyLearningRate)
                             : LearningRate::for_horizon(trace_length);
  } else {
    c.learning_rate = learning_rate_for(o.learning_rate, trace_length);
  }
  c.cost_mode = o.cost_mode.empty() ? (legacy ? CostMode::legacy : CostMode::dfdc)
                                    : parse_cost_mode(o.cost_mode);
  c.validate();
  return c;
}

std::string_view learning_rate_mode(const LearningRate& lr) {
  switch (lr.mode) {
    case LearningRate::Mode::fixed:
      return "fixed";
    case LearningRate::Mode::auto_horizon:
      return "auto";
    case LearningRate::Mode::auto_stream:
      return "auto-stream";
  }
  return "unknown";
}

void check_output_flags(const std::string& format) {
  if (format != "json" && format != "csv") {
    throw std::invalid_argument("unknown format: " + format);
  }
}

// ---------------------------------------------------------------------------
// bandit-sim

BanditRunConfig bandit_config(const BanditSimOptions& o) {
  if (o.arms < 1) throw std::invalid_argument("--arms must be >= 1");
  if (o.experts < 1) throw std::invalid_argument("--experts must be >= 1");
  if (o.experts > o.arms) throw std::invalid_argument("--experts must not exceed --arms");
  if (o.horizon < 1) throw std::invalid_argument("--horizon must be >= 1");
  if (o.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");

  BanditRunConfig cfg;
  cfg.env.kind = parse_env_kind(o.env);
  cfg.env.arms = o.arms;
  if (cfg.env.kind == EnvKind::switching) {
    cfg.env.switch_rounds = o.switch_at;
    if (cfg.env.switch_rounds.empty()) {
      cfg.env.switch_rounds.push_back(std::max<std::uint64_t>(2, o.horizon / 2 + 1));
    }
  } else if (!o.switch_at.empty()) {
    throw std::invalid_argument("--switch-at needs --env switching");
  }
  const std::size_t segments = cfg.env.switch_rounds.size() + 1;
  if (o.means.empty()) {
    // Segment s favours expert s's arm.
    for (std::size_t s = 0; s < segments; ++s) {
      std::vector<double> m(o.arms, 0.5);
      m[s % o.experts] = 0.1;
      cfg.env.means.push_back(std::move(m));
    }
  } else {
    if (o.means.size() != o.arms * segments) {
      throw std::invalid_argument("--means needs arms x segments values (" +
                                  std::to_string(o.arms * segments) + ")");
    }
    for (std::size_t s = 0; s < segments; ++s) {
      cfg.env.means.emplace_back(o.means.begin() + static_cast<std::ptrdiff_t>(s * o.arms),
                                 o.means.begin() + static_cast<std::ptrdiff_t>((s + 1) * o.arms));
    }
  }
  if (o.delay_model == "uniform") {
    cfg.env.delay = DelayModel::uniform(o.delay_max);
  } else if (o.delay_model == "fixed") {
    cfg.env.delay = DelayModel::fixed(o.delay_max);
  } else {
    throw std::invalid_argument("unknown delay model: " + o.delay_model);
  }
  cfg.env.threshold = o.threshold == 0 ? o.delay_max : o.threshold;
  for (std::size_t i = 0; i < o.experts; ++i) cfg.expert_arms.push_back(i);
  cfg.horizon = o.horizon;
  if (o.learning_rate != "auto") cfg.eta = parse_eta(o.learning_rate);
  cfg.algorithm = parse_algorithm(o.algorithm);
  cfg.estimate.importance_weighting = parse_switch(o.importance_weighting, "--importance-weighting");
  cfg.estimate.cap = parse_switch(o.cap, "--cap");
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Emission

void emit(const ojson& j, std::string& s, int indent);

bool is_scalar_array(const ojson& j) {
  for (const auto& v : j) {
    if (v.is_structured()) return false;
  }
  return true;
}

void newline(std::string& s, int indent) {
  if (indent < 0) return;
  s += '\n';
  s.append(static_cast<std::size_t>(indent), ' ');
}

// indent < 0 selects the single-line form.
void emit(const ojson& j, std::string& s, int indent) {
  const int inner = indent < 0 ? indent : indent + 2;
  switch (j.type()) {
    case ojson::value_t::object: {
      if (j.empty()) {
        s += "{}";
        return;
      }
      s += '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) s += ',';
        first = false;
        newline(s, inner);
        s += ojson(k).dump();
        s += indent < 0 ? ":" : ": ";
        emit(v, s, inner);
      }
      newline(s, indent);
      s += '}';
      return;
    }
    case ojson::value_t::array: {
      if (j.empty()) {
        s += "[]";
        return;
      }
      const bool flat = indent < 0 || is_scalar_array(j);
      s += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) s += flat && indent >= 0 ? ", " : ",";
        first = false;
        if (!flat) newline(s, inner);
        emit(v, s, flat ? -1 : inner);
      }
      if (!flat) newline(s, indent);
      s += ']';
      return;
    }
    case ojson::value_t::number_float: {
      const double v = j.get<double>();
      s += std::isfinite(v) ? format_number(v) : "null";
      return;
    }
    default:
      s += j.dump();
      return;
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_cell(const ojson& v) {
  switch (v.type()) {
    case ojson::value_t::null:
      return "";
    case ojson::value_t::string: {
      const auto& str = v.get_ref<const std::string&>();
      if (str.find_first_of(",\"\n") == std::string::npos) return str;
      std::string q = "\"";
      for (char c : str) {
        if (c == '"') q += '"';
        q += c;
      }
      return q + '"';
    }
    case ojson::value_t::number_float: {
      const double d = v.get<double>();
      return std::isfinite(d) ? format_number(d) : "";
    }
    default:
      return v.dump();
  }
}

std::string compact(const ojson& j) {
  std::string s;
  emit(j, s, -1);
  return s;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f << text;
  if (!f) throw std::runtime_error("cannot write output file: " + path);
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

// ---------------------------------------------------------------------------
// Builders

Report cache_sim(const CacheSimOptions& o) {
  if (o.cache_size < 1) throw std::invalid_argument("--cache-size must be >= 1");
  std::vector<CachePolicy> policies;
  if (o.policy == "all") {
    policies = {CachePolicy::lru, CachePolicy::lfu, CachePolicy::lecar, CachePolicy::olecar};
  } else {
    policies = {parse_cache_policy(o.policy)};
  }
  parse_switch(o.importance_weighting, "--importance-weighting");
  parse_switch(o.cap, "--cap");
  if (!o.cost_mode.empty()) parse_cost_mode(o.cost_mode);
  if (!o.learning_rate.empty()) learning_rate_for(o.learning_rate, 1);

  const Trace trace = load_trace(o);
  const std::uint64_t length = trace.size();
  const Expert experts[] = {Expert::lru, Expert::lfu};
  const BestExpert best = best_expert_cost(trace.keys, o.cache_size, experts);

  Report r;
  r.config = base_config("cache-sim", echo(o));
  ojson& resolved = r.config["resolved"];
  resolved["trace_length"] = length;
  resolved["history_size"] = o.history_size == 0 ? o.cache_size : o.history_size;
  resolved["best_expert"] = to_string(static_cast<Expert>(best.expert));
  if (!o.synthetic.empty()) {
    resolved["synthetic_spec"] =
        to_string(o.synthetic == "default" ? default_phase_spec(o.cache_size)
                                           : parse_phase_spec(o.synthetic));
  }
  ojson learned = ojson::object();

  r.summary_columns = {"policy", "eta",     "learning_rate_mode", "cost_mode", "hits",
                       "misses", "hit_rate", "C_A",                "C_best",    "regret"};
  const auto rounds = sample_rounds(length);
  for (CachePolicy p : policies) {
    EngineConfig ecfg;
    ecfg.cache_size = o.cache_size;
    if (is_learned(p)) ecfg = engine_config(o, p, length);
    const CacheRun run = run_cache_policy(trace.keys, p, ecfg);

    ojson row;
    row["policy"] = to_string(p);
    row["eta"] = nullable(run.eta);
    row["learning_rate_mode"] = is_learned(p) ? ojson(learning_rate_mode(ecfg.learning_rate))
                                              : ojson(nullptr);
    row["cost_mode"] = is_learned(p) ? ojson(to_string(ecfg.cost_mode)) : ojson(nullptr);
    row["hits"] = run.metrics.hits;
    row["misses"] = run.metrics.misses;
    row["hit_rate"] = run.metrics.hit_rate();
    row["C_A"] = run.metrics.total_cost();
    row["C_best"] = best.cost;
    row["regret"] = empirical_regret(run.metrics, best.cost);
    r.summary.push_back(std::move(row));

    if (is_learned(p)) {
      ojson l;
      l["eta"] = *run.eta;
      l["learning_rate_mode"] = learning_rate_mode(ecfg.learning_rate);
      l["cost_mode"] = to_string(ecfg.cost_mode);
      l["importance_weighting"] = ecfg.importance_weighting;
      l["cap"] = ecfg.cap;
      learned[std::string(to_string(p))] = std::move(l);
    }

    if (o.series) {
      const auto cum = run.metrics.cumulative();
      ojson block;
      block["label"] = to_string(p);
      block["round"] = rounds;
      ojson cc = ojson::array();
      ojson rg = ojson::array();
      for (std::uint64_t t : rounds) {
        cc.push_back(cum[t - 1]);
        rg.push_back(cum[t - 1] - best.prefix[t - 1]);
      }
      block["cum_cost"] = std::move(cc);
      block["regret"] = std::move(rg);
      if (!run.metrics.sample_weights.empty()) block["weights"] = run.metrics.sample_weights;
      r.series.push_back(std::move(block));
    }
  }
  resolved["learned"] = std::move(learned);
  return r;
}

Report bandit_sim(const BanditSimOptions& o) {
  ExperimentConfig exp;
  exp.run = bandit_config(o);
  for (std::uint64_t i = 0; i < o.seeds; ++i) exp.seeds.push_back(o.seed_base + i);
  exp.threads = std::max(1u, o.threads);
  const ExperimentReport rep = run_experiment(exp);

  Report r;
  r.config = base_config("bandit-sim", echo(o));
  ojson& resolved = r.config["resolved"];
  resolved["eta"] = rep.eta;
  resolved["eta_mode"] = exp.run.eta ? "fixed" : "auto";
  resolved["seeds"] = exp.seeds;
  resolved["expert_arms"] = exp.run.expert_arms;
  resolved["means"] = exp.run.env.means;
  resolved["switch_rounds"] = exp.run.env.switch_rounds;
  resolved["threshold"] = exp.run.env.threshold;
  resolved["incurred_cost"] =
      exp.run.algorithm == Algorithm::exp4 ? "raw" : "delay-decayed x/d, 0 past the threshold";

  r.summary_columns = {"label", "seed", "eta", "C_A", "C_best", "regret",
                       "regret_sd", "regret_se", "bound", "optimal_bound", "raw_cost"};
  double mean_cost = 0.0;
  double mean_best = 0.0;
  double mean_raw = 0.0;
  for (const BanditRun& run : rep.runs) {
    ojson row;
    row["label"] = "seed";
    row["seed"] = run.seed;
    row["eta"] = run.eta;
    row["C_A"] = run.metrics.total_cost();
    row["C_best"] = run.best.cost;
    row["regret"] = run.regret.final_value;
    row["regret_sd"] = nullptr;
    row["regret_se"] = nullptr;
    row["bound"] = rep.final_bound;
    row["optimal_bound"] = rep.optimal_bound;
    row["raw_cost"] = run.raw_cost;
    r.summary.push_back(std::move(row));
    mean_cost += run.metrics.total_cost();
    mean_best += run.best.cost;
    mean_raw += run.raw_cost;
  }
  const auto count = static_cast<double>(rep.runs.size());
  ojson mean;
  mean["label"] = "mean";
  mean["seed"] = nullptr;
  mean["eta"] = rep.eta;
  mean["C_A"] = mean_cost / count;
  mean["C_best"] = mean_best / count;
  mean["regret"] = rep.mean_final_regret;
  mean["regret_sd"] = rep.sd_final_regret;
  mean["regret_se"] = rep.se_final_regret;
  mean["bound"] = rep.final_bound;
  mean["optimal_bound"] = rep.optimal_bound;
  mean["raw_cost"] = mean_raw / count;
  r.summary.push_back(std::move(mean));

  if (o.series) {
    ojson block;
    block["label"] = "mean";
    ojson round = ojson::array(), cum = ojson::array(), reg = ojson::array(),
          se = ojson::array(), bound = ojson::array(), w = ojson::array();
    for (const CurvePoint& pt : rep.curve) {
      round.push_back(pt.round);
      cum.push_back(pt.mean_cost);
      reg.push_back(pt.mean_regret);
      se.push_back(pt.se_regret);
      bound.push_back(pt.bound);
      w.push_back(pt.mean_weights);
    }
    block["round"] = std::move(round);
    block["cum_cost"] = std::move(cum);
    block["regret"] = std::move(reg);
    block["regret_se"] = std::move(se);
    block["bound"] = std::move(bound);
    block["weights"] = std::move(w);
    r.series.push_back(std::move(block));
  }
  return r;
}

Report sweep(const SweepOptions& o) {
  if (o.param != "learning-rate") throw std::invalid_argument("unknown sweep parameter: " + o.param);
  std::vector<std::string> values;
  for (const auto& v : o.values) {
    if (!v.empty()) values.push_back(v);
  }
  if (values.empty()) throw std::invalid_argument("sweep needs a non-empty --values list");

  Report r;
  r.config = base_config("sweep", echo(o));
  std::vector<std::string> sub_columns;
  std::size_t best = 0;
  double best_regret = std::numeric_limits<double>::infinity();

  for (std::size_t i = 0; i < values.size(); ++i) {
    Report sub;
    if (o.target == "cache") {
      CacheSimOptions c = o.cache;
      if (c.policy != "lecar" && c.policy != "olecar") {
        throw std::invalid_argument("cache sweeps need --policy lecar or olecar");
      }
      c.learning_rate = values[i];
      c.series = false;
      sub = cache_sim(c);
    } else if (o.target == "bandit") {
      BanditSimOptions b = o.bandit;
      b.learning_rate = values[i];
      b.series = false;
      sub = bandit_sim(b);
    } else {
      throw std::invalid_argument("unknown sweep target: " + o.target);
    }
    sub_columns = sub.summary_columns;
    ojson row;
    row["value"] = values[i];
    for (const auto& [k, v] : sub.summary.back().items()) row[k] = v;
    const double regret = row["regret"].get<double>();
    if (regret < best_regret) {
      best_regret = regret;
      best = i;
    }
    r.summary.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < r.summary.size(); ++i) r.summary[i]["argmin"] = i == best;

  r.summary_columns = {"value"};
  r.summary_columns.insert(r.summary_columns.end(), sub_columns.begin(), sub_columns.end());
  r.summary_columns.push_back("argmin");
  r.config["resolved"]["argmin_value"] = values[best];
  r.config["resolved"]["argmin_eta"] = r.summary[best]["eta"];
  return r;
}

Report replay(const ojson& config) {
  if (!config.is_object() || !config.contains("command") || !config.contains("options")) {
    throw std::invalid_argument("report config lacks a command or options echo");
  }
  const auto command = config.at("command").get<std::string>();
  const ojson& options = config.at("options");
  try {
    if (command == "cache-sim") return cache_sim(from_echo<CacheSimOptions>(options));
    if (command == "bandit-sim") return bandit_sim(from_echo<BanditSimOptions>(options));
    if (command == "sweep") return sweep(from_echo<SweepOptions>(options));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad options echo: ") + e.what());
  }
  throw std::invalid_argument("cannot replay command: " + command);
}

// ---------------------------------------------------------------------------
// Output

std::string to_json_text(const Report& report, bool timestamp) {
  ojson doc;
  doc["config"] = report.config;
  doc["summary"] = report.summary;
  doc["series"] = report.series;
  if (timestamp) doc["generated_at"] = utc_timestamp();
  std::string s;
  emit(doc, s, 0);
  s += '\n';
  return s;
}

std::string summary_csv(const Report& report) {
  std::string s = "# config: " + compact(report.config) + "\n";
  for (std::size_t i = 0; i < report.summary_columns.size(); ++i) {
    if (i) s += ',';
    s += report.summary_columns[i];
  }
  s += '\n';
  for (const auto& row : report.summary) {
    for (std::size_t i = 0; i < report.summary_columns.size(); ++i) {
      if (i) s += ',';
      const auto it = row.find(report.summary_columns[i]);
      if (it != row.end()) s += csv_cell(*it);
    }
    s += '\n';
  }
  return s;
}

std::string series_csv(const ojson& block) {
  std::vector<std::string> columns;
  for (const auto& [k, v] : block.items()) {
    if (k != "label" && k != "weights") columns.push_back(k);
  }
  const std::size_t n_rows = block.at("round").size();
  const std::size_t n_weights =
      block.contains("weights") && !block["weights"].empty() ? block["weights"][0].size() : 0;

  std::string s;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) s += ',';
    s += columns[i];
  }
  for (std::size_t w = 0; w < n_weights; ++w) s += ",w_" + std::to_string(w + 1);
  s += '\n';
  for (std::size_t row = 0; row < n_rows; ++row) {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) s += ',';
      s += csv_cell(block[columns[i]][row]);
    }
    for (std::size_t w = 0; w < n_weights; ++w) s += "," + csv_cell(block["weights"][row][w]);
    s += '\n';
  }
  return s;
}

void write_report(const Report& report, const std::string& out, const std::string& format,
                  bool timestamp, std::ostream& stdout_stream) {
  check_output_flags(format);
  if (format == "json") {
    const std::string text = to_json_text(report, timestamp);
    if (out.empty()) {
      stdout_stream << text;
    } else {
      write_file(out, text);
    }
    return;
  }
  std::string text = summary_csv(report);
  if (timestamp) text = "# generated_at: " + utc_timestamp() + "\n" + text;
  if (out.empty()) {
    stdout_stream << text;
    return;
  }
  write_file(out, text);
  const std::filesystem::path p(out);
  const std::string stem = (p.parent_path() / p.stem()).string();
  for (const auto& block : report.series) {
    const std::string label =
        report.series.size() == 1 ? "" : "." + block.at("label").get<std::string>();
    write_file(stem + label + ".series.csv", series_csv(block));
  }
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct OutputFlags {
  std::string out;
  std::string format = "json";
  bool timestamp = false;
  bool no_series = false;
};

void add_output_flags(CLI::App& app, OutputFlags& f) {
  app.add_option("--out", f.out, "Report path (default: standard output)");
  app.add_option("--format", f.format, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_flag("--timestamp", f.timestamp, "Add a generated_at field");
  app.add_flag("--no-series", f.no_series, "Omit the time series");
}

const std::vector<std::string> kOnOff = {"on", "off"};

void add_cache_flags(CLI::App& app, CacheSimOptions& o, bool with_learning_rate) {
  auto* trace = app.add_option("--trace", o.trace, "Trace file");
  auto* synth = app.add_option("--synthetic", o.synthetic,
                               "Phase spec (freq:LEN:ALPHA[:S],scan:LEN:ALPHA,...) or 'default'");
  trace->excludes(synth);
  app.add_option("--trace-format", o.trace_format, "Trace file format")
      ->check(CLI::IsMember({"lines", "csv"}))
      ->capture_default_str();
  app.add_option("--csv-column", o.csv_column, "0-based key column for csv traces")
      ->capture_default_str();
  app.add_flag("--csv-header", o.csv_header, "Skip the first csv row");
  app.add_option("--cache-size", o.cache_size, "Cache size in pages");
  app.add_option("--policy", o.policy, "Replacement policy")
      ->check(CLI::IsMember({"lru", "lfu", "lecar", "olecar", "all"}))
      ->capture_default_str();
  if (with_learning_rate) {
    app.add_option("--learning-rate", o.learning_rate,
                   "FLOAT in (0,1], 'auto' (tuned to the trace length) or 'auto-stream'");
  }
  app.add_option("--history-size", o.history_size, "Eviction history length (default: cache size)");
  app.add_option("--cost-mode", o.cost_mode, "Feedback cost")
      ->check(CLI::IsMember({"dfdc", "legacy"}));
  app.add_option("--seed", o.seed, "Seed for sampling and synthetic traces")->capture_default_str();
}

void add_bandit_flags(CLI::App& app, BanditSimOptions& o, bool with_learning_rate) {
  app.add_option("--arms", o.arms, "Number of arms K")->capture_default_str();
  app.add_option("--experts", o.experts, "Number of one-hot experts N (expert i advises arm i)")
      ->capture_default_str();
  app.add_option("--horizon", o.horizon, "Rounds T")->capture_default_str();
  app.add_option("--env", o.env, "Environment")
      ->check(CLI::IsMember({"stochastic", "switching"}))
      ->capture_default_str();
  app.add_option("--means", o.means, "Mean costs, arms x segments values")->delimiter(',');
  app.add_option("--switch-at", o.switch_at, "Rounds where a new segment starts")->delimiter(',');
  app.add_option("--delay-model", o.delay_model, "Delay distribution")
      ->check(CLI::IsMember({"uniform", "fixed"}))
      ->capture_default_str();
  app.add_option("--delay-max", o.delay_max, "Maximum (or fixed) delay")->capture_default_str();
  app.add_option("--threshold", o.threshold, "Drop threshold m (default: delay max)");
  if (with_learning_rate) {
    app.add_option("--learning-rate", o.learning_rate, "FLOAT in (0,1] or 'auto'")
        ->capture_default_str();
  }
  app.add_option("--algorithm", o.algorithm, "Learner")
      ->check(CLI::IsMember({"exp4", "exp4-dfdc"}))
      ->capture_default_str();
  app.add_option("--seeds", o.seeds, "Number of replicates")->capture_default_str();
  app.add_option("--seed-base", o.seed_base, "First seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->capture_default_str();
}

// JSON reports carry the echo under "config"; CSV reports on a "# config:"
// comment line.
ojson read_report_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open report: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  constexpr std::string_view kMarker = "# config: ";
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line) && line.rfind('#', 0) == 0;) {
    if (line.rfind(kMarker, 0) == 0) {
      const ojson config = ojson::parse(line.substr(kMarker.size()), nullptr, false);
      if (config.is_discarded()) throw std::invalid_argument("bad config line in " + path);
      return config;
    }
  }
  const ojson doc = ojson::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("config")) {
    throw std::invalid_argument("not a report: " + path);
  }
  return doc["config"];
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cache replacement and delayed-feedback bandit simulator", "dfdc_sim"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CacheSimOptions cache;
  OutputFlags cache_out;
  auto* cs = app.add_subcommand("cache-sim", "Replay a trace through cache policies");
  add_cache_flags(*cs, cache, true);
  cs->add_option("--importance-weighting", cache.importance_weighting, "Divide by acting probability")
      ->check(CLI::IsMember(kOnOff))
      ->capture_default_str();
  cs->add_option("--cap", cache.cap, "Cap estimates at 1")->check(CLI::IsMember(kOnOff))->capture_default_str();
  add_output_flags(*cs, cache_out);

  BanditSimOptions bandit;
  OutputFlags bandit_out;
  auto* bs = app.add_subcommand("bandit-sim", "Replicated delayed-feedback bandit experiment");
  add_bandit_flags(*bs, bandit, true);
  bs->add_option("--importance-weighting", bandit.importance_weighting, "Divide by acting probability")
      ->check(CLI::IsMember(kOnOff))
      ->capture_default_str();
  bs->add_option("--cap", bandit.cap, "Cap estimates at 1")->check(CLI::IsMember(kOnOff))->capture_default_str();
  add_output_flags(*bs, bandit_out);

  SweepOptions sw;
  OutputFlags sweep_out;
  std::string sweep_iw;
  std::string sweep_cap;
  auto* ss = app.add_subcommand("sweep", "Learning-rate sweep over cache or bandit runs");
  ss->add_option("--target", sw.target, "What to sweep")
      ->check(CLI::IsMember({"cache", "bandit"}))
      ->capture_default_str();
  ss->add_option("--param", sw.param, "Swept parameter")->capture_default_str();
  ss->add_option("--values", sw.values, "Comma-separated values")->delimiter(',')->required();
  add_cache_flags(*ss, sw.cache, false);
  add_bandit_flags(*ss, sw.bandit, false);
  ss->add_option("--importance-weighting", sweep_iw, "Divide by acting probability")
      ->check(CLI::IsMember(kOnOff));
  ss->add_option("--cap", sweep_cap, "Cap estimates at 1")->check(CLI::IsMember(kOnOff));
  add_output_flags(*ss, sweep_out);

  std::string replay_path;
  OutputFlags replay_out;
  auto* rs = app.add_subcommand("replay", "Re-run the configuration echoed in a report");
  rs->add_option("report", replay_path, "JSON or CSV report")->required()->check(CLI::ExistingFile);
  add_output_flags(*rs, replay_out);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("dfdc_sim");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    Report report;
    const OutputFlags* flags = nullptr;
    if (cs->parsed()) {
      flags = &cache_out;
      cache.series = !flags->no_series;
      report = cache_sim(cache);
    } else if (bs->parsed()) {
      flags = &bandit_out;
      bandit.series = !flags->no_series;
      report = bandit_sim(bandit);
    } else if (ss->parsed()) {
      flags = &sweep_out;
      if (!sweep_iw.empty()) sw.cache.importance_weighting = sweep_iw;
      if (!sweep_cap.empty()) sw.cache.cap = sweep_cap;
      if (!sweep_iw.empty()) sw.bandit.importance_weighting = sweep_iw;
      if (!sweep_cap.empty()) sw.bandit.cap = sweep_cap;
      report = sweep(sw);
    } else {
      flags = &replay_out;
      report = replay(read_report_config(replay_path));
    }
    write_report(report, flags->out, flags->format, flags->timestamp, out);
    return kOk;
  } catch (const TraceError& e) {
    err << "error: " << e.what() << '\n';
    return kTraceIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace dfdc::cli
