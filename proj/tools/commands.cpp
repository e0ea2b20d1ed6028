#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <regex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tracejudge/archive.hpp"
#include "tracejudge/error.hpp"
#include "tracejudge/perturbation.hpp"

namespace tracejudge::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const StratumCounts kBaselineCounts{{Stratum::LowVol, 20}, {Stratum::MedVol, 20}, {Stratum::HighVol, 20}};

bool inside(const fs::path& child, const fs::path& dir) {
  const auto c = fs::weakly_canonical(child);
  const auto d = fs::weakly_canonical(dir);
  auto [end, _] = std::mismatch(d.begin(), d.end(), c.begin(), c.end());
  return end == d.end();
}

// Replaces out/<name>/ so reruns never append to a previous run's files.
fs::path prepare_dir(const RunConfig& cfg, std::string_view name, const std::vector<fs::path>& inputs) {
  const fs::path dir = cfg.out / name;
  for (const auto& in : inputs) {
    if (inside(in, dir)) {
      throw ConfigError(fmt::format("input {} lies inside the output directory {}", in.string(), dir.string()));
    }
  }
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw DataError(fmt::format("write failed for {}", path.string()));
}

void write_json(const fs::path& path, const ordered_json& j) { write_text(path, j.dump(2) + "\n"); }

struct Judges {
  std::vector<std::unique_ptr<Judge>> owned;
  std::vector<Judge*> ptrs;
};

Judges make_judges(const RunConfig& cfg) {
  Judges j;
  if (cfg.judges.empty()) {
    j.owned.push_back(std::make_unique<ReferenceJudge>());
  } else {
    for (const auto& c : cfg.judges) j.owned.push_back(make_judge(c));
  }
  for (auto& p : j.owned) j.ptrs.push_back(p.get());
  return j;
}

std::vector<Judgment> judge_all(std::span<Judge* const> judges, const Episode& ep, Archive& archive) {
  std::vector<Judgment> out;
  for (Judge* judge : judges) {
    try {
      out.push_back(judge->evaluate(ep));
    } catch (const JudgeError& e) {
      archive.append_error(ep.id, judge->id(), e.what(), e.raw());
      throw JudgeError(fmt::format("episode {}: judge {}: {}", ep.id, judge->id(), e.what()), e.raw());
    }
  }
  return out;
}

JudgeConfig judge_from_json(const json& j) {
  JudgeConfig c;
  c.id = j.value("id", c.id);
  const auto provider = j.value("provider", std::string("reference"));
  if (provider == "reference") {
    c.provider = Provider::Reference;
  } else if (provider == "http") {
    c.provider = Provider::Http;
  } else {
    throw ConfigError(fmt::format("judge {}: unknown provider '{}'", c.id, provider));
  }
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model_name = j.value("model", c.model_name);
  c.temperature = j.value("temperature", c.temperature);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
  c.retries = j.value("retries", c.retries);
  c.backoff = std::chrono::milliseconds(j.value("backoff_ms", c.backoff.count()));
  if (j.contains("adapter")) {
    const auto name = j.at("adapter").get<std::string>();
    const auto a = parse_adapter(name);
    if (!a) throw ConfigError(fmt::format("judge {}: unknown adapter '{}'", c.id, name));
    c.adapter = *a;
  }
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.validate();
  return c;
}

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
    }
  }
}

fs::path existing(const json& j, const fs::path& base, std::string_view key) {
  fs::path p = j.get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  if (!fs::exists(p)) throw ConfigError(fmt::format("paths.{}: {} does not exist", key, p.string()));
  return p;
}

std::string sweep_csv(std::span<const sim::SweepRow> rows) {
  std::string out = "lambda,mape,da,deficient_score,stable\n";
  for (const auto& r : rows) {
    out += fmt::format("{:.2f},{:.4f},{:.2f},{:.4f},{}\n", r.lambda, r.mape, r.da, r.deficient_score,
                       r.stable ? "yes" : "no");
  }
  return out;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  scenario.seed = s;
  stats.seed = s;
}

json interpolate_env(const json& j) {
  static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  if (j.is_string()) {
    const auto text = j.get<std::string>();
    std::string out;
    auto last = text.cbegin();
    for (std::sregex_iterator it(text.begin(), text.end(), var), end; it != end; ++it) {
      const auto name = (*it)[1].str();
      const char* value = std::getenv(name.c_str());
      if (!value) throw ConfigError(fmt::format("environment variable {} is not set", name));
      out.append(last, (*it)[0].first);
      out += value;
      last = (*it)[0].second;
    }
    out.append(last, text.cend());
    return out;
  }
  if (j.is_object()) {
    json o = json::object();
    for (const auto& [k, v] : j.items()) o[k] = interpolate_env(v);
    return o;
  }
  if (j.is_array()) {
    json a = json::array();
    for (const auto& v : j) a.push_back(interpolate_env(v));
    return a;
  }
  return j;
}

RunConfig config_from_json(const json& raw, const fs::path& base) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  const json j = interpolate_env(raw);
  check_keys(j, "config", {"seed", "out", "judges", "scenario", "stats", "sweep", "corpus", "paths"});
  RunConfig c;
  try {
    if (j.contains("scenario")) c.scenario = sim::scenario_from_json(j.at("scenario"));
    c.apply_seed(j.value("seed", c.scenario.seed));
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    for (const auto& jj : j.value("judges", json::array())) c.judges.push_back(judge_from_json(jj));
    if (j.contains("stats")) {
      const auto& s = j.at("stats");
      check_keys(s, "stats", {"first", "second", "horizon", "bandwidth", "bootstrap_resamples", "ci_level",
                              "mcs_resamples", "block_len", "mcs_levels"});
      auto& o = c.stats;
      o.first = s.value("first", o.first);
      o.second = s.value("second", o.second);
      o.horizon = s.value("horizon", o.horizon);
      if (s.contains("bandwidth") && !s.at("bandwidth").is_null()) o.bandwidth = s.at("bandwidth").get<std::size_t>();
      o.bootstrap_resamples = s.value("bootstrap_resamples", o.bootstrap_resamples);
      o.ci_level = s.value("ci_level", o.ci_level);
      o.mcs_resamples = s.value("mcs_resamples", o.mcs_resamples);
      o.block_len = s.value("block_len", o.block_len);
      o.mcs_levels = s.value("mcs_levels", o.mcs_levels);
      if (o.bootstrap_resamples == 0 || o.mcs_resamples == 0) throw ConfigError("stats: resample counts must be positive");
      if (!(o.ci_level > 0.0 && o.ci_level < 1.0)) throw ConfigError("stats: ci_level must lie in (0, 1)");
      if (!(o.block_len >= 1.0)) throw ConfigError("stats: block_len must be at least 1");
    }
    if (j.contains("sweep")) c.lambdas = j.at("sweep").value("lambdas", c.lambdas);
    if (c.lambdas.empty()) throw ConfigError("sweep: lambdas must not be empty");
    if (j.contains("corpus")) {
      c.corpus_days = j.at("corpus").value("days", c.corpus_days);
      c.corpus_warmup = j.at("corpus").value("warmup", c.corpus_warmup);
    }
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, "paths", {"episodes", "baselines", "forecasts"});
      if (p.contains("episodes")) c.episodes = existing(p.at("episodes"), base, "episodes");
      if (p.contains("baselines")) c.baselines = existing(p.at("baselines"), base, "baselines");
      if (p.contains("forecasts")) c.forecasts = existing(p.at("forecasts"), base, "forecasts");
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(fmt::format("{}: not valid JSON", path.string()));
  return config_from_json(j, path.parent_path());
}

void select_judges(RunConfig& cfg, const std::vector<std::string>& ids) {
  if (ids.empty()) return;
  std::vector<JudgeConfig> chosen;
  for (const auto& id : ids) {
    auto it = std::find_if(cfg.judges.begin(), cfg.judges.end(), [&](const JudgeConfig& c) { return c.id == id; });
    if (it != cfg.judges.end()) {
      chosen.push_back(*it);
    } else if (id == "reference") {
      chosen.push_back(JudgeConfig{});
    } else {
      throw ConfigError(fmt::format("--judges: no judge '{}' in the config", id));
    }
  }
  cfg.judges = std::move(chosen);
}

EvaluateSummary cmd_evaluate(const RunConfig& cfg, const fs::path& episodes_path) {
  auto episodes = read_episodes_jsonl(episodes_path);
  for (const auto& e : episodes) validate(e);
  auto judges = make_judges(cfg);
  const auto dir = prepare_dir(cfg, "evaluate", {episodes_path});
  Archive archive(dir / "archive.jsonl");
  std::vector<Judgment> all;
  std::string consensus_lines;
  EvaluateSummary summary;
  const auto flush = [&] {
    write_text(dir / "consensus.jsonl", consensus_lines);
    auto report = agreement_report(all);
    report["episodes"] = summary.episodes;
    report["judgments"] = summary.judgments;
    write_json(dir / "agreement.json", report);
  };
  for (const auto& ep : episodes) {
    std::vector<Judgment> js;
    try {
      js = judge_all(judges.ptrs, ep, archive);
    } catch (const JudgeError&) {
      flush();  // keep what was judged before the failure
      throw;
    }
    const auto c = consensus(js);
    archive.append(ep.id, js, c);
    consensus_lines += to_json(c).dump() + "\n";
    all.insert(all.end(), js.begin(), js.end());
    ++summary.episodes;
    summary.judgments += js.size();
    ++summary.consensus_records;
  }
  flush();
  spdlog::info("evaluate: {} episodes, {} judgments", summary.episodes, summary.judgments);
  return summary;
}

SpecificityReport cmd_perturb(const RunConfig& cfg, const fs::path& baselines_path) {
  auto baselines = read_episodes_jsonl(baselines_path);
  if (baselines.size() != 60) baselines = sample_stratified(baselines, kBaselineCounts, cfg.seed);
  const auto set = build_validation_set(baselines, cfg.seed);
  auto judges = make_judges(cfg);
  const auto dir = prepare_dir(cfg, "perturb", {baselines_path});
  std::string manifest;
  for (const auto& v : set) manifest += serialize_manifest_line(v) + "\n";
  write_text(dir / "validation_set.jsonl", manifest);

  Archive archive(dir / "archive.jsonl");
  EvaluationMap evaluations;
  for (const auto& v : set) {
    const auto js = judge_all(judges.ptrs, v.episode, archive);
    archive.append(v.episode.id, js, consensus(js));
    for (const auto& j : js) evaluations[j.judge_id][j.episode_id] = j;
  }
  const auto report = specificity_report(set, evaluations);
  write_text(dir / "specificity.csv", to_csv(report));
  write_json(dir / "specificity.json", to_json(report));
  spdlog::info("perturb: {} episodes in the validation set", set.size());
  return report;
}

sim::LoopResult cmd_loop(const RunConfig& cfg, std::optional<std::size_t> cycles) {
  sim::Scenario s = cfg.scenario;
  if (cycles) s.cycle.cycles = *cycles;
  s.cycle.validate();
  auto judges = make_judges(cfg);
  const auto dir = prepare_dir(cfg, "loop", {});
  write_json(dir / "scenario.json", to_json(s));
  Archive archive(dir / "archive.jsonl");
  std::ofstream reports(dir / "cycles.jsonl", std::ios::binary | std::ios::trunc);
  if (!reports) throw DataError("cannot write cycles.jsonl");
  const auto result = sim::run_closed_loop(s, judges.ptrs, &archive, [&](const sim::CycleReport& r) {
    reports << to_json(r).dump() << '\n' << std::flush;  // prior cycles survive a later judge failure
  });
  write_json(dir / "baseline.json", to_json(result.baseline));
  write_json(dir / "frozen_policy.json", to_json(result.final_policy));
  const std::vector<std::pair<std::string, sim::Policy>> policies{{"pre", s.policy}, {"post", result.final_policy}};
  write_forecast_csv(dir / "forecasts.csv", sim::forecast_panel(s, policies));
  spdlog::info("loop: {} cycles", result.cycles.size());
  return result;
}

BatteryResult cmd_stats(const RunConfig& cfg, const fs::path& forecasts) {
  const auto panel = read_forecast_csv(forecasts);
  auto result = stats_battery(panel, cfg.stats);
  check_stats_report(result.report);
  const auto dir = prepare_dir(cfg, "stats", {forecasts});
  write_json(dir / "stats.json", result.report);
  return result;
}

std::vector<sim::SweepRow> cmd_sweep(const RunConfig& cfg) {
  auto judges = make_judges(cfg);
  const auto rows = sim::lambda_sweep(cfg.scenario, cfg.lambdas, judges.ptrs);
  const auto dir = prepare_dir(cfg, "sweep", {});
  write_text(dir / "sweep.csv", sweep_csv(rows));
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) j.push_back(to_json(r));
  write_json(dir / "sweep.json", j);
  return rows;
}

std::vector<Episode> cmd_simulate(const RunConfig& cfg, const std::optional<fs::path>& policy_path,
                                  bool baselines_only) {
  sim::Policy policy = sim::calibrated_policy();
  if (policy_path) {
    std::ifstream in(*policy_path);
    if (!in) throw ConfigError(fmt::format("cannot read policy {}", policy_path->string()));
    const auto j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(fmt::format("{}: not valid JSON", policy_path->string()));
    policy = sim::policy_from_json(j);
  }
  auto episodes = sim::simulate_corpus(cfg.scenario.market, cfg.scenario.agent, policy, cfg.corpus_days,
                                       cfg.corpus_warmup, cfg.seed);
  if (baselines_only) episodes = sample_stratified(episodes, kBaselineCounts, cfg.seed);
  std::vector<fs::path> inputs;
  if (policy_path) inputs.push_back(*policy_path);
  const auto dir = prepare_dir(cfg, "simulate", inputs);
  write_episodes_jsonl(dir / "episodes.jsonl", episodes);
  return episodes;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return kDataError;
  } catch (const JudgeError& e) {
    spdlog::error("judge error: {}", e.what());
    return kJudgeError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kInternal;
  }
}

}  // namespace tracejudge::cli
