#include "tracejudge/sim/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <Eigen/Dense>

#include <fmt/format.h>

#include "tracejudge/error.hpp"
#include "tracejudge/parallel.hpp"

namespace tracejudge::sim {

namespace {

constexpr double kMinLogStd = -7.0;  // sd ~ 0.0009
constexpr double kMaxLogStd = -3.5;  // sd ~ 0.03

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

PolicyHead head(ActorFeatures theta, double sd) {
  PolicyHead h;
  h.theta = theta;
  h.log_std = std::log(sd);
  return h;
}

// Percent absolute error of yesterday's forecast against today's price.
double mape_percent(double forecast, double price) { return std::abs(forecast - price) / price * 100.0; }

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

// Actor features: 1, label, (VIX-20)/10, dVIX/5, alpha-0.5, (tau-ref)/0.1, prev dtau/0.1,
// prev dalpha/0.1.
Policy calibrated_policy() {
  Policy p;
  p.tau = head({0.0, 0.0, 0.0, -0.35, 0.0, -0.6, 0.0, 0.0}, 0.003);
  // alpha drifts toward 0.8 on calm days and 0.2 on anomalous ones.
  p.alpha = head({0.9, -1.8, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0}, 0.01);
  return p;
}

Policy miscalibrated_policy() {
  Policy p;
  // Raises tau with VIX spikes where it should lower it.
  p.tau = head({0.0, 0.0, 0.0, 0.5, 0.0, -0.6, 0.0, 0.0}, 0.003);
  p.alpha = head({0.9, -1.8, -0.5, 0.0, -3.0, 0.0, 0.0, 0.0}, 0.01);
  return p;
}

namespace {
nlohmann::ordered_json head_json(const PolicyHead& h) {
  nlohmann::ordered_json j;
  j["theta"] = h.theta;
  j["log_std"] = h.log_std;
  return j;
}

PolicyHead head_from_json(const nlohmann::json& j) {
  PolicyHead h;
  h.theta = j.at("theta").get<ActorFeatures>();
  h.log_std = j.at("log_std").get<double>();
  if (!(h.log_std >= kMinLogStd && h.log_std <= kMaxLogStd)) {
    throw ConfigError(fmt::format("policy log_std must lie in [{}, {}]", kMinLogStd, kMaxLogStd));
  }
  return h;
}
}  // namespace

nlohmann::ordered_json to_json(const Policy& p) {
  nlohmann::ordered_json j;
  j["tau"] = head_json(p.tau);
  j["alpha"] = head_json(p.alpha);
  return j;
}

Policy policy_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "calibrated") return calibrated_policy();
    if (name == "miscalibrated") return miscalibrated_policy();
    throw ConfigError(fmt::format("unknown policy preset '{}'", name));
  }
  try {
    return {head_from_json(j.at("tau")), head_from_json(j.at("alpha"))};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("policy: {}", e.what()));
  }
}

void AgentConfig::validate() const {
  if (!(tau_min > 0.0 && tau_min < tau_max)) throw ConfigError("agent: need 0 < tau_min < tau_max");
  if (!(initial_tau >= tau_min && initial_tau <= tau_max)) {
    throw ConfigError("agent: initial_tau outside [tau_min, tau_max]");
  }
  if (!(initial_alpha >= 0.0 && initial_alpha <= 1.0)) throw ConfigError("agent: initial_alpha outside [0, 1]");
  if (!(calibration_vol > 0.0)) throw ConfigError("agent: calibration_vol must be positive");
  if (detector_window == 0) throw ConfigError("agent: detector_window must be positive");
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  AgentConfig c;
  try {
    c.initial_tau = j.value("initial_tau", c.initial_tau);
    c.initial_alpha = j.value("initial_alpha", c.initial_alpha);
    c.tau_reference = j.value("tau_reference", c.tau_reference);
    c.tau_min = j.value("tau_min", c.tau_min);
    c.tau_max = j.value("tau_max", c.tau_max);
    c.calibration_vol = j.value("calibration_vol", c.calibration_vol);
    c.detector_window = j.value("detector_window", c.detector_window);
    c.momentum_coef = j.value("momentum_coef", c.momentum_coef);
    c.reversion_coef = j.value("reversion_coef", c.reversion_coef);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("agent config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const AgentConfig& c) {
  nlohmann::ordered_json j;
  j["initial_tau"] = c.initial_tau;
  j["initial_alpha"] = c.initial_alpha;
  j["tau_reference"] = c.tau_reference;
  j["tau_min"] = c.tau_min;
  j["tau_max"] = c.tau_max;
  j["calibration_vol"] = c.calibration_vol;
  j["detector_window"] = c.detector_window;
  j["momentum_coef"] = c.momentum_coef;
  j["reversion_coef"] = c.reversion_coef;
  j["seed"] = c.seed;
  return j;
}

AgentState make_agent(const AgentConfig& config, const Policy& policy) {
  config.validate();
  AgentState s;
  s.config = config;
  s.policy = policy;
  s.tau = config.initial_tau;
  s.alpha = config.initial_alpha;
  s.rng.seed(config.seed);
  return s;
}

namespace {

struct Update {
  double daily_mape = 0.0;
  bool has_error = false;
  double log_return = 0.0;
  double vix_change = 0.0;
};

// Shared bookkeeping for observe and agent_step: realized error, returns, detector window.
Update absorb(AgentState& s, const MarketDay& day) {
  Update u;
  if (s.observed_days > 0) {
    u.log_return = std::log(day.price / s.last_price);
    u.vix_change = day.vix - s.last_vix;
    u.daily_mape = mape_percent(s.last_prediction, day.price);
    u.has_error = true;
    s.daily_mape.push_back(u.daily_mape);
    s.hits.push_back(sign(s.last_prediction - s.last_price) == sign(day.price - s.last_price));
    const std::size_t n = std::min<std::size_t>(s.daily_mape.size(), kErrorWindow);
    s.rolling_mape.push_back(
        std::accumulate(s.daily_mape.end() - static_cast<std::ptrdiff_t>(n), s.daily_mape.end(), 0.0) /
        static_cast<double>(n));
  }
  s.z_scores.push_back(u.log_return / s.config.calibration_vol);
  if (s.z_scores.size() > s.config.detector_window) s.z_scores.erase(s.z_scores.begin());
  return u;
}

double forecast(const AgentState& s, double price, double log_return) {
  const double momentum = price * std::exp(s.config.momentum_coef * log_return);
  const double reversion = price * std::exp(-s.config.reversion_coef * log_return);
  return s.alpha * momentum + (1.0 - s.alpha) * reversion;
}

double detector_error(const AgentState& s) {
  double sq = 0.0;
  for (double z : s.z_scores) sq += z * z;
  return std::sqrt(sq / static_cast<double>(s.z_scores.size())) / 10.0;
}

void finish_day(AgentState& s, const MarketDay& day, double prediction, const Update& u) {
  s.last_price = day.price;
  s.last_prediction = prediction;
  s.last_vix = day.vix;
  s.last_vix_change = u.vix_change;
  ++s.observed_days;
  ++s.day_index;
}

}  // namespace

void observe(AgentState& s, const MarketDay& day) {
  const auto u = absorb(s, day);
  finish_day(s, day, forecast(s, day.price, u.log_return), u);
  s.last_action = {};
}

double policy_mean(const PolicyHead& head, const ActorFeatures& phi) {
  return kActionBound * std::tanh(dot(head.theta, phi));
}

StepResult agent_step(AgentState& s, const MarketDay& day) {
  if (s.observed_days < kWarmupDays) {
    throw DataError(fmt::format("agent_step: cold window ({} of {} warm-up days)", s.observed_days,
                                kWarmupDays));
  }
  const auto u = absorb(s, day);
  const double e = detector_error(s);
  const bool label = e > s.tau;
  const double prediction = forecast(s, day.price, u.log_return);

  StepResult out;
  auto& phi = out.observation.actor;
  const double lab = label ? 1.0 : 0.0;
  const double vix_level = (day.vix - 20.0) / 10.0;
  const double vix_move = u.vix_change / 5.0;
  const double alpha_c = s.alpha - 0.5;
  const double prev_dtau = s.last_action.delta_tau / kActionBound;
  phi = {1.0, lab, vix_level, vix_move, alpha_c, (s.tau - s.config.tau_reference) / 0.1, prev_dtau,
         s.last_action.delta_alpha / kActionBound};

  std::normal_distribution<double> normal(0.0, 1.0);
  out.raw_tau = policy_mean(s.policy.tau, phi) + std::exp(s.policy.tau.log_std) * normal(s.rng);
  out.raw_alpha = policy_mean(s.policy.alpha, phi) + std::exp(s.policy.alpha.log_std) * normal(s.rng);
  const auto action = ControllerAction::clamped(out.raw_tau, out.raw_alpha);

  auto& t = out.trace;
  t.day_index = s.day_index;
  t.market = {day.price, day.volume, day.vix, day.sentiment};
  t.detector = {e, s.tau, label ? Regime::Anomalous : Regime::Normal};
  t.routing = RoutingState::from_alpha(s.alpha);
  t.action = action;
  t.prediction = prediction;
  const std::size_t n = std::min<std::size_t>(s.hits.size(), kErrorWindow);
  t.performance.mape_20d = s.rolling_mape.back();
  t.performance.da_20d =
      100.0 * std::accumulate(s.hits.end() - static_cast<std::ptrdiff_t>(n), s.hits.end(), 0) /
      static_cast<double>(n);
  t.performance.trend = classify_trend(s.rolling_mape);
  if (s.daily_mape.size() > kErrorWindow) {
    t.performance.error_stats = error_stats(s.daily_mape, s.daily_mape.size() - 1);
  }

  finish_day(s, day, prediction, u);
  s.tau = std::clamp(s.tau + action.delta_tau, s.config.tau_min, s.config.tau_max);
  s.alpha = std::clamp(s.alpha + action.delta_alpha, 0.0, 1.0);
  s.last_action = action;
  return out;
}

double base_reward(const BehavioralTrace& t, double y) {
  const double p = t.market.price;
  const double hit = sign(t.prediction - p) == sign(y - p) ? 0.1 : 0.0;
  return -std::abs(t.prediction - y) / y + hit - 0.05 * std::abs(t.action.delta_tau);
}

void FinetuneConfig::validate() const {
  if (epochs == 0) throw ConfigError("finetune: epochs must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("finetune: learning_rate must be >= 0");
  if (!(ridge > 0.0)) throw ConfigError("finetune: ridge must be positive");
  if (!(soft_update >= 0.0 && soft_update <= 1.0)) throw ConfigError("finetune: soft_update outside [0, 1]");
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("finetune: discount outside [0, 1)");
  if (!(entropy_coef >= 0.0)) throw ConfigError("finetune: entropy_coef must be >= 0");
}

// Action terms are in units of the action bound. The critic carries no term linear in the
// action alone: with eight episode-level penalties per cycle such a term is unidentified and
// only adds drift.
CriticFeatures tau_critic_features(const ActorFeatures& phi, double a) {
  const double u = a / kActionBound;
  return {1.0, phi[1], phi[2], phi[3] * phi[3], phi[5], u * u, u * phi[3], u * phi[6], u * phi[1], u * phi[2]};
}

CriticFeatures alpha_critic_features(const ActorFeatures& phi, double a) {
  const double u = a / kActionBound;
  const double next = phi[4] + a;  // post-decision alpha - 0.5
  return {1.0, phi[1], phi[2], phi[3] * phi[3], phi[4], u * u, next * phi[1], next * (1.0 - phi[1]), next * phi[2],
          u * phi[3]};
}

namespace {

using FeatureFn = CriticFeatures (*)(const ActorFeatures&, double);

// dQ/da of the linear critic, matching the feature maps above.
double tau_action_gradient(const CriticFeatures& w, const ActorFeatures& phi, double a) {
  const double u = a / kActionBound;
  return (2.0 * u * w[5] + phi[3] * w[6] + phi[6] * w[7] + phi[1] * w[8] + phi[2] * w[9]) / kActionBound;
}

double alpha_action_gradient(const CriticFeatures& w, const ActorFeatures& phi, double a) {
  const double u = a / kActionBound;
  return (2.0 * u * w[5] + phi[3] * w[9]) / kActionBound + w[6] * phi[1] + w[7] * (1.0 - phi[1]) + w[8] * phi[2];
}

double dot9(const CriticFeatures& w, const CriticFeatures& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < kCriticFeatures; ++i) s += w[i] * f[i];
  return s;
}

CriticFeatures ridge_fit(const std::vector<CriticFeatures>& x, const std::vector<double>& y, double ridge) {
  Eigen::Matrix<double, kCriticFeatures, kCriticFeatures> a =
      Eigen::Matrix<double, kCriticFeatures, kCriticFeatures>::Identity() * (ridge * static_cast<double>(x.size()));
  Eigen::Matrix<double, kCriticFeatures, 1> b = Eigen::Matrix<double, kCriticFeatures, 1>::Zero();
  for (std::size_t t = 0; t < x.size(); ++t) {
    const Eigen::Map<const Eigen::Matrix<double, kCriticFeatures, 1>> f(x[t].data());
    a.noalias() += f * f.transpose();
    b.noalias() += f * y[t];
  }
  const Eigen::Matrix<double, kCriticFeatures, 1> w = a.ldlt().solve(b);
  CriticFeatures out;
  for (std::size_t i = 0; i < kCriticFeatures; ++i) out[i] = w(static_cast<Eigen::Index>(i));
  return out;
}

struct HeadData {
  FeatureFn features;
  double (*action_gradient)(const CriticFeatures&, const ActorFeatures&, double);
  std::vector<double> noise;     // standardized exploration draws of the behavior policy
  std::vector<double> penalty;
  std::vector<double> taken;     // executed raw actions
};

void finetune_head(PolicyHead& h, const HeadData& d, std::span<const Transition> buffer,
                   const FinetuneConfig& cfg) {
  const std::size_t n = buffer.size();
  std::vector<CriticFeatures> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = d.features(buffer[t].state.actor, d.taken[t]);
  std::optional<CriticFeatures> target;
  std::vector<double> y(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t t = 0; t < n; ++t) {
      const auto& next = buffer[t].next.actor;
      const double bootstrap = target ? dot9(*target, d.features(next, policy_mean(h, next))) : 0.0;
      y[t] = buffer[t].reward - d.penalty[t] + cfg.discount * bootstrap;
    }
    const auto w = ridge_fit(x, y, cfg.ridge);
    if (!target) {
      target = w;
    } else {
      for (std::size_t i = 0; i < kCriticFeatures; ++i) (*target)[i] += cfg.soft_update * (w[i] - (*target)[i]);
    }

    ActorFeatures g_theta{};
    double g_log_std = 0.0;
    const double sd = std::exp(h.log_std);
    for (std::size_t t = 0; t < n; ++t) {
      const auto& phi = buffer[t].state.actor;
      const double pre = dot(h.theta, phi);
      const double th = std::tanh(pre);
      const double a = kActionBound * th + sd * d.noise[t];
      const double dq = d.action_gradient(w, phi, a);
      const double dmean = kActionBound * (1.0 - th * th);
      for (std::size_t i = 0; i < kActorFeatures; ++i) g_theta[i] += dq * dmean * phi[i];
      g_log_std += dq * sd * d.noise[t];
    }
    for (std::size_t i = 0; i < kActorFeatures; ++i) h.theta[i] += cfg.learning_rate * g_theta[i] / static_cast<double>(n);
    h.log_std = std::clamp(
        h.log_std + cfg.learning_rate * (g_log_std / static_cast<double>(n) + cfg.entropy_coef), kMinLogStd,
        kMaxLogStd);
  }
}

}  // namespace

Policy finetune_controller(const Policy& policy, std::span<const Transition> buffer,
                           const FinetuneConfig& cfg) {
  cfg.validate();
  if (buffer.empty()) throw DataError("finetune_controller: empty buffer");
  Policy p = policy;
  HeadData tau{tau_critic_features, tau_action_gradient, {}, {}, {}};
  HeadData alpha{alpha_critic_features, alpha_action_gradient, {}, {}, {}};
  const double sd_tau = std::exp(policy.tau.log_std);
  const double sd_alpha = std::exp(policy.alpha.log_std);
  for (const auto& tr : buffer) {
    const auto& phi = tr.state.actor;
    tau.noise.push_back((tr.raw_tau - policy_mean(policy.tau, phi)) / sd_tau);
    alpha.noise.push_back((tr.raw_alpha - policy_mean(policy.alpha, phi)) / sd_alpha);
    tau.penalty.push_back(tr.tau_penalty);
    alpha.penalty.push_back(tr.alpha_penalty);
    tau.taken.push_back(clamp_action(tr.raw_tau));
    alpha.taken.push_back(clamp_action(tr.raw_alpha));
  }
  finetune_head(p.tau, tau, buffer, cfg);
  finetune_head(p.alpha, alpha, buffer, cfg);
  return p;
}

}  // namespace tracejudge::sim
