#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace tracejudge::sim {

/// Two-state regime-switching market. State 0 is calm, state 1 turbulent.
struct MarketModel {
  std::array<std::array<double, 2>, 2> transition{{{0.97, 0.03}, {0.04, 0.96}}};
  std::array<double, 2> volatility{0.008, 0.024};       // daily log-return sd
  std::array<double, 2> autocorrelation{0.15, -0.35};   // AR(1) coefficient of returns
  std::array<double, 2> vix_mean{14.0, 31.0};
  std::array<double, 2> vix_noise{2.2, 3.2};            // daily VIX innovation sd
  double vix_reversion = 0.35;                          // pull toward the regime mean per day
  double sentiment_coupling = 12.0;
  double sentiment_noise = 0.08;
  double drift = 0.0002;
  double initial_price = 100.0;
  double volume_log_mean = 17.3;
  double volume_log_sd = 0.25;
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
};

MarketModel market_model_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const MarketModel& m);

struct MarketDay {
  double price = 0.0;
  double log_return = 0.0;
  std::int64_t volume = 0;
  double vix = 0.0;
  double sentiment = 0.0;
  int regime = 0;  // ground truth, diagnostics only
};

std::vector<MarketDay> simulate_market(const MarketModel& model, std::size_t days);

/// Long-run share of days in the turbulent state.
double stationary_high_share(const MarketModel& model);

}  // namespace tracejudge::sim
