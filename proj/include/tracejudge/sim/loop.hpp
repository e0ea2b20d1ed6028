#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/agreement.hpp"
#include "tracejudge/archive.hpp"
#include "tracejudge/battery.hpp"
#include "tracejudge/judge.hpp"
#include "tracejudge/reward.hpp"
#include "tracejudge/sim/agent.hpp"
#include "tracejudge/sim/market.hpp"

namespace tracejudge::sim {

enum class CreditMode { Targeted, Uniform };

struct CycleConfig {
  std::size_t days = 40;
  std::size_t episode_length = kEpisodeLength;
  std::size_t cycles = 3;
  std::size_t assets = 20;            // independent market paths sharing one controller
  std::size_t warmup_days = 30;
  std::size_t evaluation_days = 100;  // per asset; fixed segment scored before the loop and after each cycle
  bool penalty_enabled = true;
  CreditMode credit = CreditMode::Targeted;
  FinetuneConfig finetune;

  void validate() const;
};

struct Scenario {
  std::uint64_t seed = 7;
  MarketModel market;
  AgentConfig agent;
  Policy policy = miscalibrated_policy();
  CycleConfig cycle;
  RewardConfig reward;
};

/// Throws ConfigError. Seeds inside market and agent are replaced by streams derived from
/// the scenario seed.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Scenario& s);

/// Scenario used by the closed-loop acceptance checks.
Scenario deficiency_scenario(std::uint64_t seed = 7);

struct JudgedEpisodes {
  std::vector<Episode> episodes;
  std::vector<std::vector<Judgment>> judgments;  // per episode, in judge order
  std::vector<ConsensusScores> consensus;
  DimMap<double> mean_scores;
};

/// Every judge scores every episode. Appends to `archive` when given.
JudgedEpisodes judge_episodes(std::vector<Episode> episodes, std::span<Judge* const> judges,
                              Archive* archive = nullptr);

struct Evaluation {
  DimMap<double> mean_scores;
  double mape = 0.0;  // percent
  double da = 0.0;    // percent
  std::size_t episodes = 0;
};

nlohmann::ordered_json to_json(const Evaluation& e);

/// Scores a policy on the scenario's fixed evaluation segments, one per asset, with common
/// random numbers.
Evaluation evaluate_policy(const Scenario& scenario, const Policy& policy,
                           std::span<Judge* const> judges);

struct CycleReport {
  std::size_t cycle = 0;
  DimMap<double> mean_scores;  // observation-phase consensus means
  std::vector<Dimension> deficient;
  bool activated = false;
  double mean_penalty = 0.0;
  double mean_tau_penalty = 0.0;
  double mean_alpha_penalty = 0.0;
  double mape = 0.0;
  double da = 0.0;
  double parameter_change = 0.0;  // L2 norm of the actor parameter update
  std::optional<Evaluation> evaluation;  // after fine-tuning
  std::vector<std::string> warnings;
};

nlohmann::ordered_json to_json(const CycleReport& r);

/// Each agent observes its own window, all episodes are judged together, and the shared
/// policy is fine-tuned under the penalty when any dimension mean falls below theta. Every
/// agent then carries the updated policy.
CycleReport run_cycle(std::span<AgentState> agents, std::span<const std::vector<MarketDay>> windows,
                      std::span<Judge* const> judges, const RewardConfig& reward,
                      const CycleConfig& cfg, std::size_t cycle_index, Archive* archive = nullptr);

struct LoopResult {
  Evaluation baseline;
  std::vector<CycleReport> cycles;
  Policy final_policy;
};

/// Called after each cycle's evaluation, before the next cycle starts.
using CycleCallback = std::function<void(const CycleReport&)>;

LoopResult run_closed_loop(const Scenario& scenario, std::span<Judge* const> judges,
                           Archive* archive = nullptr, const CycleCallback& on_cycle = {});

/// Episodes of one controller on one simulated path of `days` days after `warmup` days of
/// observation. Market and agent streams are derived from `seed`.
std::vector<Episode> simulate_corpus(const MarketModel& market, const AgentConfig& agent,
                                     const Policy& policy, std::size_t days, std::size_t warmup,
                                     std::uint64_t seed);

/// Next-day forecasts of each named policy on the scenario's evaluation segments, with
/// common random numbers, plus a random-walk model when `random_walk` is set.
ForecastPanel forecast_panel(const Scenario& scenario,
                             std::span<const std::pair<std::string, Policy>> policies,
                             bool random_walk = true);

struct SweepRow {
  double lambda = 0.0;
  double mape = 0.0;
  double da = 0.0;
  double deficient_score = 0.0;  // final evaluation mean over initially deficient dimensions
  bool stable = true;
};

nlohmann::ordered_json to_json(const SweepRow& r);

/// Oscillation heuristic: unstable when some dimension's trend over the evaluation
/// sequence changes sign twice.
bool stable_sequence(std::span<const DimMap<double>> means);

std::vector<SweepRow> lambda_sweep(const Scenario& scenario, std::span<const double> lambdas,
                                   std::span<Judge* const> judges);

}  // namespace tracejudge::sim
