#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/battery.hpp"
#include "tracejudge/judge.hpp"
#include "tracejudge/perturbation.hpp"
#include "tracejudge/sim/loop.hpp"

namespace tracejudge::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigError = 2,
  kDataError = 3,
  kJudgeError = 4,
  kDegenerate = 5,  // statistics ran but every test was degenerate
};

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path out = "out";
  std::vector<JudgeConfig> judges;  // empty means one reference judge
  sim::Scenario scenario = sim::deficiency_scenario();
  BatteryOptions stats;
  std::vector<double> lambdas{0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  std::size_t corpus_days = 4000;
  std::size_t corpus_warmup = 30;
  std::optional<std::filesystem::path> episodes;
  std::optional<std::filesystem::path> baselines;
  std::optional<std::filesystem::path> forecasts;

  /// Pushes the run seed into the scenario and the statistics options.
  void apply_seed(std::uint64_t s);
};

/// Replaces every "${NAME}" inside JSON strings with the environment value. Throws
/// ConfigError when a referenced variable is unset.
nlohmann::json interpolate_env(const nlohmann::json& j);

/// Throws ConfigError. Relative paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Keeps only the judges whose ids are listed; "reference" is always available.
void select_judges(RunConfig& cfg, const std::vector<std::string>& ids);

/// Every command writes only below out/<command>/, which it replaces on each run.
struct EvaluateSummary {
  std::size_t episodes = 0;
  std::size_t judgments = 0;
  std::size_t consensus_records = 0;
};

EvaluateSummary cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& episodes);
/// Baselines beyond 60 are reduced by seeded 20/20/20 stratified sampling.
SpecificityReport cmd_perturb(const RunConfig& cfg, const std::filesystem::path& baselines);
sim::LoopResult cmd_loop(const RunConfig& cfg, std::optional<std::size_t> cycles = {});
BatteryResult cmd_stats(const RunConfig& cfg, const std::filesystem::path& forecasts);
std::vector<sim::SweepRow> cmd_sweep(const RunConfig& cfg);
/// Episode corpus of the calibrated controller, or of `policy` when given. With
/// `baselines_only` the corpus is reduced to a seeded 20/20/20 stratified sample.
std::vector<Episode> cmd_simulate(const RunConfig& cfg, const std::optional<std::filesystem::path>& policy,
                                  bool baselines_only = false);

/// Maps the library's exception types to exit codes and logs the message.
int run_guarded(const std::function<int()>& body);

}  // namespace tracejudge::cli
