#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/sim/market.hpp"
#include "tracejudge/trace.hpp"

namespace tracejudge::sim {

inline constexpr std::size_t kActorFeatures = 8;
inline constexpr std::size_t kCriticFeatures = 10;

/// 1, label, (VIX-20)/10, dVIX/5, alpha-0.5, (tau-ref)/0.1, prev dtau/0.1, prev dalpha/0.1.
using ActorFeatures = std::array<double, kActorFeatures>;
using CriticFeatures = std::array<double, kCriticFeatures>;

/// One action head: mean 0.1 * tanh(theta . phi) with Gaussian exploration.
struct PolicyHead {
  ActorFeatures theta{};
  double log_std = -5.0;

  friend bool operator==(const PolicyHead&, const PolicyHead&) = default;
};

struct Policy {
  PolicyHead tau;
  PolicyHead alpha;

  friend bool operator==(const Policy&, const Policy&) = default;
};

/// Well-calibrated controller used for the fixture corpus.
Policy calibrated_policy();
/// Threshold head leans the wrong way on VIX moves; routing head is sound.
Policy miscalibrated_policy();

nlohmann::ordered_json to_json(const Policy& p);
Policy policy_from_json(const nlohmann::json& j);

struct AgentConfig {
  double initial_tau = 0.2;
  double initial_alpha = 0.8;
  double tau_reference = 0.2;  // centre of the threshold feature
  double tau_min = 0.01;
  double tau_max = 1.0;
  double calibration_vol = 0.008;     // return sd that maps to z = 1
  std::size_t detector_window = 5;    // RMS window of z-scores
  double momentum_coef = 0.2;
  double reversion_coef = 0.3;
  std::uint64_t seed = 1;             // policy sampling stream

  void validate() const;
};

AgentConfig agent_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const AgentConfig& c);

/// State the controller sees when choosing an action.
struct Observation {
  ActorFeatures actor{};
};

struct AgentState {
  AgentConfig config;
  Policy policy;
  double tau = 0.2;
  double alpha = 0.8;
  std::int64_t day_index = 0;
  std::vector<double> z_scores;        // trailing detector window
  std::vector<double> daily_mape;      // percent, full history
  std::vector<double> rolling_mape;    // percent, full history
  std::vector<int> hits;               // direction hits, full history
  std::size_t observed_days = 0;
  double last_price = 0.0;
  double last_prediction = 0.0;
  double last_vix = 0.0;
  double last_vix_change = 0.0;
  ControllerAction last_action;
  std::mt19937_64 rng;
};

AgentState make_agent(const AgentConfig& config, const Policy& policy);

/// Days of history agent_step needs before it may act.
inline constexpr std::size_t kWarmupDays = 25;

/// Feeds a day without acting; the controller holds tau and alpha.
void observe(AgentState& state, const MarketDay& day);

struct StepResult {
  BehavioralTrace trace;
  Observation observation;
  double raw_tau = 0.0;    // unclamped policy samples
  double raw_alpha = 0.0;
};

/// Detect, route, predict, adjust. Throws DataError on a cold window.
StepResult agent_step(AgentState& state, const MarketDay& day);

/// -|y_hat - y|/y + 0.1 [direction hit] - 0.05 |delta_tau|, with sign(0) matching sign(0).
double base_reward(const BehavioralTrace& trace, double realized_next_price);

struct Transition {
  Observation state;
  Observation next;
  double raw_tau = 0.0;
  double raw_alpha = 0.0;
  double reward = 0.0;
  double tau_penalty = 0.0;
  double alpha_penalty = 0.0;
};

struct FinetuneConfig {
  std::size_t epochs = 10;
  double learning_rate = 4.0;  // plain gradient step on the linear actor
  double ridge = 1e-3;         // critic regularization per transition
  double soft_update = 0.005;
  double discount = 0.0;
  double entropy_coef = 1e-3;

  void validate() const;
};

/// Post-decision critic features of one head for action `a` in state `phi`.
CriticFeatures tau_critic_features(const ActorFeatures& phi, double a);
CriticFeatures alpha_critic_features(const ActorFeatures& phi, double a);

/// Each epoch refits a linear Q per head by ridge regression on reward minus that head's
/// penalty plus the discounted target value, then takes one full-batch reparameterized
/// gradient step on the actor. The critic lives only inside the call; the target starts at
/// the first fit and is soft-blended after every epoch. A penalty already covers its whole
/// episode, so the default discount of 0 keeps it from being counted again through
/// bootstrapped successors.
Policy finetune_controller(const Policy& policy, std::span<const Transition> buffer,
                           const FinetuneConfig& cfg);

double policy_mean(const PolicyHead& head, const ActorFeatures& phi);

}  // namespace tracejudge::sim
