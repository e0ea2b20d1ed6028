#include <cmath>
#include <optional>

#include <gtest/gtest.h>

#include "tracejudge/error.hpp"
#include "tracejudge/sim/loop.hpp"

namespace tj = tracejudge;
namespace sim = tracejudge::sim;

namespace {

// Transitions from one agent run, built the same way the loop builds them.
std::vector<sim::Transition> transitions(std::size_t days, std::uint64_t seed) {
  sim::MarketModel m;
  m.seed = seed;
  const auto path = sim::simulate_market(m, days + sim::kWarmupDays);
  sim::AgentConfig cfg;
  cfg.seed = seed + 1;
  auto policy = sim::miscalibrated_policy();
  policy.tau.log_std = -3.5;
  auto agent = sim::make_agent(cfg, policy);
  for (std::size_t i = 0; i < sim::kWarmupDays; ++i) sim::observe(agent, path[i]);
  std::vector<sim::Transition> out;
  std::optional<sim::StepResult> prev;
  for (std::size_t i = sim::kWarmupDays; i < path.size(); ++i) {
    auto step = sim::agent_step(agent, path[i]);
    if (prev) {
      sim::Transition tr;
      tr.state = prev->observation;
      tr.next = step.observation;
      tr.raw_tau = prev->raw_tau;
      tr.raw_alpha = prev->raw_alpha;
      tr.reward = sim::base_reward(prev->trace, path[i].price);
      out.push_back(tr);
    }
    prev = std::move(step);
  }
  return out;
}

double mean_abs_tau(const sim::Policy& p, std::span<const sim::Transition> buffer) {
  double s = 0.0;
  for (const auto& tr : buffer) s += std::abs(sim::policy_mean(p.tau, tr.state.actor));
  return s / static_cast<double>(buffer.size());
}

sim::Scenario small_scenario() {
  auto s = sim::deficiency_scenario(3);
  s.cycle.assets = 3;
  s.cycle.evaluation_days = 20;
  s.cycle.days = 20;
  s.cycle.cycles = 2;
  return s;
}

tj::BehavioralTrace trace_at(double price, double prediction, double delta_tau) {
  tj::BehavioralTrace t;
  t.market.price = price;
  t.prediction = prediction;
  t.action.delta_tau = delta_tau;
  return t;
}

}  // namespace

TEST(Market, DeterministicPerSeed) {
  sim::MarketModel m;
  m.seed = 5;
  const auto a = sim::simulate_market(m, 300);
  const auto b = sim::simulate_market(m, 300);
  ASSERT_EQ(a.size(), 300u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].price, b[i].price);
    EXPECT_EQ(a[i].vix, b[i].vix);
    EXPECT_GT(a[i].price, 0.0);
    EXPECT_GT(a[i].vix, 0.0);
  }
  m.seed = 6;
  EXPECT_NE(sim::simulate_market(m, 300).back().price, a.back().price);
}

TEST(Market, ZeroVolatilityAndDriftHoldsPrice) {
  sim::MarketModel m;
  m.volatility = {0.0, 0.0};
  m.drift = 0.0;
  for (const auto& d : sim::simulate_market(m, 100)) EXPECT_DOUBLE_EQ(d.price, m.initial_price);
}

TEST(Market, InvalidModelRejected) {
  sim::MarketModel m;
  m.transition[0] = {0.5, 0.6};
  EXPECT_THROW(m.validate(), tj::ConfigError);
}

TEST(BaseReward, HandValues) {
  // Up-move predicted, up-move realized, exact forecast.
  EXPECT_NEAR(sim::base_reward(trace_at(100.0, 101.0, 0.0), 101.0), 0.1, 1e-15);
  // Down predicted, up realized, 1% miss, delta_tau 0.1.
  EXPECT_NEAR(sim::base_reward(trace_at(100.0, 99.0, 0.1), 100.0), -0.01 - 0.005, 1e-15);
  // Flat prediction on a flat day counts as a hit.
  EXPECT_NEAR(sim::base_reward(trace_at(100.0, 100.0, 0.0), 100.0), 0.1, 1e-15);
}

TEST(Agent, ColdWindowRejected) {
  sim::MarketModel m;
  const auto path = sim::simulate_market(m, 5);
  auto agent = sim::make_agent(sim::AgentConfig{}, sim::calibrated_policy());
  EXPECT_THROW(sim::agent_step(agent, path[0]), tj::DataError);
}

TEST(Agent, TracesAreValid) {
  const auto buffer = transitions(60, 9);
  EXPECT_EQ(buffer.size(), 59u);
}

TEST(Policy, JsonRoundTrip) {
  const auto p = sim::miscalibrated_policy();
  EXPECT_EQ(sim::policy_from_json(sim::to_json(p)), p);
}

TEST(Finetune, ZeroLearningRateLeavesPolicy) {
  const auto buffer = transitions(200, 1);
  sim::FinetuneConfig cfg;
  cfg.learning_rate = 0.0;
  auto p = sim::miscalibrated_policy();
  p.tau.log_std = -3.5;
  EXPECT_EQ(sim::finetune_controller(p, buffer, cfg), p);
}

TEST(Finetune, Deterministic) {
  const auto buffer = transitions(200, 2);
  auto p = sim::miscalibrated_policy();
  p.tau.log_std = -3.5;
  EXPECT_EQ(sim::finetune_controller(p, buffer, {}), sim::finetune_controller(p, buffer, {}));
}

TEST(Finetune, ThresholdPenaltyShrinksThresholdActions) {
  auto buffer = transitions(2000, 3);
  auto p = sim::miscalibrated_policy();
  p.tau.log_std = -3.5;
  const auto plain = sim::finetune_controller(p, buffer, {});
  for (auto& tr : buffer) {
    const double u = tr.raw_tau / 0.1;
    tr.tau_penalty = 0.01 * u * u;  // reward scale; far larger penalties overshoot at the default step
  }
  const auto penalized = sim::finetune_controller(p, buffer, {});
  EXPECT_LT(mean_abs_tau(penalized, buffer), mean_abs_tau(plain, buffer));
  EXPECT_EQ(penalized.alpha, plain.alpha);
}

TEST(Finetune, InvalidConfigRejected) {
  sim::FinetuneConfig cfg;
  cfg.discount = 1.0;
  EXPECT_THROW(cfg.validate(), tj::ConfigError);
}

TEST(Loop, ActivationFollowsDeficiency) {
  auto s = small_scenario();
  tj::ReferenceJudge judge;
  tj::Judge* judges[] = {&judge};
  const auto r = sim::run_closed_loop(s, judges);
  ASSERT_EQ(r.cycles.size(), 2u);
  for (const auto& c : r.cycles) {
    bool any_low = false;
    for (auto d : tj::kDimensions) any_low = any_low || c.mean_scores[d] < s.reward.theta();
    EXPECT_EQ(c.activated, any_low);
    EXPECT_EQ(c.activated, !c.deficient.empty());
    ASSERT_TRUE(c.evaluation);
  }
}

TEST(Loop, LowThresholdNeverActivates) {
  auto s = small_scenario();
  s.reward = tj::RewardConfig(0.15, 1.0);
  tj::ReferenceJudge judge;
  tj::Judge* judges[] = {&judge};
  const auto r = sim::run_closed_loop(s, judges);
  for (const auto& c : r.cycles) {
    EXPECT_FALSE(c.activated);
    EXPECT_EQ(c.mean_penalty, 0.0);
  }
  EXPECT_EQ(r.final_policy, s.policy);
}

TEST(Loop, DeterministicAndCallbackPerCycle) {
  const auto s = small_scenario();
  tj::ReferenceJudge judge;
  tj::Judge* judges[] = {&judge};
  std::size_t calls = 0;
  const auto a = sim::run_closed_loop(s, judges, nullptr, [&](const sim::CycleReport&) { ++calls; });
  const auto b = sim::run_closed_loop(s, judges);
  EXPECT_EQ(calls, 2u);
  EXPECT_EQ(a.final_policy, b.final_policy);
  for (std::size_t i = 0; i < a.cycles.size(); ++i) EXPECT_EQ(sim::to_json(a.cycles[i]), sim::to_json(b.cycles[i]));
}

TEST(Sweep, OneRowPerLambdaAndRepeatable) {
  const auto s = small_scenario();
  tj::ReferenceJudge judge;
  tj::Judge* judges[] = {&judge};
  const std::vector<double> lambdas{0.05, 0.10, 0.15, 0.20, 0.25, 0.30};
  const auto a = sim::lambda_sweep(s, lambdas, judges);
  const auto b = sim::lambda_sweep(s, lambdas, judges);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].lambda, lambdas[i]);
    EXPECT_EQ(sim::to_json(a[i]), sim::to_json(b[i]));
  }
}

TEST(Stability, OscillationHeuristic) {
  auto seq = [](std::initializer_list<double> v) {
    std::vector<tj::DimMap<double>> out;
    for (double x : v) {
      tj::DimMap<double> m;
      m.values.fill(3.0);
      m[tj::Dimension::RC] = x;
      out.push_back(m);
    }
    return out;
  };
  EXPECT_TRUE(sim::stable_sequence(seq({2.0, 2.5, 3.0, 3.2})));
  EXPECT_TRUE(sim::stable_sequence(seq({2.0, 3.0, 2.8})));
  EXPECT_FALSE(sim::stable_sequence(seq({2.0, 3.0, 2.0, 3.0})));
}

TEST(Scenario, JsonRoundTrip) {
  const auto s = sim::deficiency_scenario(11);
  const auto back = sim::scenario_from_json(sim::to_json(s));
  EXPECT_EQ(sim::to_json(back), sim::to_json(s));
}

TEST(Corpus, SeededEpisodes) {
  const auto a = sim::simulate_corpus(sim::MarketModel{}, sim::AgentConfig{}, sim::calibrated_policy(), 50, 30, 4);
  const auto b = sim::simulate_corpus(sim::MarketModel{}, sim::AgentConfig{}, sim::calibrated_policy(), 50, 30, 4);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_EQ(a, b);
}
