#include "tracejudge/sim/market.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "tracejudge/error.hpp"

namespace tracejudge::sim {

void MarketModel::validate() const {
  for (const auto& row : transition) {
    if (row[0] < 0.0 || row[1] < 0.0 || std::abs(row[0] + row[1] - 1.0) > 1e-12) {
      throw ConfigError("market: transition rows must be probabilities summing to 1");
    }
  }
  for (int s = 0; s < 2; ++s) {
    if (volatility[s] < 0.0) throw ConfigError("market: volatility must be non-negative");
    if (vix_noise[s] < 0.0) throw ConfigError("market: VIX noise must be non-negative");
    if (std::abs(autocorrelation[s]) >= 1.0) throw ConfigError("market: |autocorrelation| must be < 1");
  }
  if (!(initial_price > 0.0)) throw ConfigError("market: initial price must be positive");
  if (vix_reversion <= 0.0 || vix_reversion > 1.0) throw ConfigError("market: vix_reversion must be in (0, 1]");
}

namespace {
template <class T, std::size_t N>
std::array<T, N> array_from(const nlohmann::json& j, const char* key, std::array<T, N> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::array<T, N>>();
}
}  // namespace

MarketModel market_model_from_json(const nlohmann::json& j) {
  MarketModel m;
  try {
    if (j.contains("transition")) m.transition = j.at("transition").get<std::array<std::array<double, 2>, 2>>();
    m.volatility = array_from(j, "volatility", m.volatility);
    m.autocorrelation = array_from(j, "autocorrelation", m.autocorrelation);
    m.vix_mean = array_from(j, "vix_mean", m.vix_mean);
    m.vix_noise = array_from(j, "vix_noise", m.vix_noise);
    m.vix_reversion = j.value("vix_reversion", m.vix_reversion);
    m.sentiment_coupling = j.value("sentiment_coupling", m.sentiment_coupling);
    m.sentiment_noise = j.value("sentiment_noise", m.sentiment_noise);
    m.drift = j.value("drift", m.drift);
    m.initial_price = j.value("initial_price", m.initial_price);
    m.volume_log_mean = j.value("volume_log_mean", m.volume_log_mean);
    m.volume_log_sd = j.value("volume_log_sd", m.volume_log_sd);
    m.seed = j.value("seed", m.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("market config: {}", e.what()));
  }
  m.validate();
  return m;
}

nlohmann::ordered_json to_json(const MarketModel& m) {
  nlohmann::ordered_json j;
  j["transition"] = m.transition;
  j["volatility"] = m.volatility;
  j["autocorrelation"] = m.autocorrelation;
  j["vix_mean"] = m.vix_mean;
  j["vix_noise"] = m.vix_noise;
  j["vix_reversion"] = m.vix_reversion;
  j["sentiment_coupling"] = m.sentiment_coupling;
  j["sentiment_noise"] = m.sentiment_noise;
  j["drift"] = m.drift;
  j["initial_price"] = m.initial_price;
  j["volume_log_mean"] = m.volume_log_mean;
  j["volume_log_sd"] = m.volume_log_sd;
  j["seed"] = m.seed;
  return j;
}

std::vector<MarketDay> simulate_market(const MarketModel& m, std::size_t days) {
  m.validate();
  std::mt19937_64 rng(m.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<MarketDay> out;
  out.reserve(days);
  int regime = unif(rng) < stationary_high_share(m) ? 1 : 0;
  double price = m.initial_price;
  double prev_ret = 0.0;
  double vix = m.vix_mean[regime];
  for (std::size_t t = 0; t < days; ++t) {
    if (t > 0) regime = unif(rng) < m.transition[regime][1] ? 1 : 0;
    const double ret = m.drift + m.autocorrelation[regime] * prev_ret + m.volatility[regime] * normal(rng);
    if (t > 0) price *= std::exp(ret);
    vix += m.vix_reversion * (m.vix_mean[regime] - vix) + m.vix_noise[regime] * normal(rng);
    vix = std::max(vix, 9.0);
    const double sentiment = std::clamp(
        0.1 - m.sentiment_coupling * std::abs(ret) + m.sentiment_noise * normal(rng), -1.0, 1.0);
    const double log_volume = m.volume_log_mean + 0.3 * regime + m.volume_log_sd * normal(rng);
    MarketDay d;
    d.price = price;
    d.log_return = t > 0 ? ret : 0.0;
    d.volume = static_cast<std::int64_t>(std::llround(std::exp(log_volume)));
    d.vix = vix;
    d.sentiment = sentiment;
    d.regime = regime;
    out.push_back(d);
    prev_ret = d.log_return;
  }
  return out;
}

double stationary_high_share(const MarketModel& m) {
  const double up = m.transition[0][1];
  const double down = m.transition[1][0];
  if (up + down == 0.0) return 0.0;
  return up / (up + down);
}

}  // namespace tracejudge::sim
