#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/parallel.hpp"
#include "tracejudge/stats/hac.hpp"

namespace tracejudge {

/// Next-day price forecasts of several models on a common (asset, day) grid.
struct ForecastPanel {
  std::vector<std::string> models;
  std::vector<std::string> assets;
  std::vector<std::string> days;                            // in time order
  std::vector<std::vector<double>> previous;                // [asset][day] price at forecast time
  std::vector<std::vector<double>> actual;                  // [asset][day] realized price
  std::vector<std::vector<double>> vix;                     // [asset][day]
  std::vector<std::vector<std::vector<double>>> forecast;  // [model][asset][day]

  std::size_t model_index(std::string_view id) const;
  /// Throws DataError naming the first misaligned (model, asset) pair or invalid value.
  void validate() const;
};

/// Long-form CSV, header model,asset,date,previous,actual,forecast,vix. Dates sort
/// lexicographically into time order. Throws DataError naming the first missing or
/// conflicting key.
ForecastPanel read_forecast_csv(const std::filesystem::path& path);
void write_forecast_csv(const std::filesystem::path& path, const ForecastPanel& panel);

/// SE, AE and QLIKE act on return-space errors (forecast - actual) / previous, QLIKE with
/// the trailing 22-day realized variance of returns up to the target day; MAPE acts on
/// prices.
stats::LossPanel loss_panel(const ForecastPanel& panel, stats::LossKind kind);

/// 1 on days whose cross-asset mean VIX is at or above its median over days, else 0.
std::vector<double> high_vix_indicator(const ForecastPanel& panel);

struct BatteryOptions {
  std::string first = "post";   // differentials are first - second
  std::string second = "pre";
  std::size_t horizon = 1;
  std::optional<std::size_t> bandwidth;
  std::size_t bootstrap_resamples = 10000;
  double ci_level = 0.95;
  std::size_t mcs_resamples = 5000;
  double block_len = 10.0;
  std::vector<double> mcs_levels{0.75, 0.90};
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct BatteryResult {
  nlohmann::ordered_json report;
  bool all_degenerate = false;  // paired t and every DM test degenerate
};

/// Paired t with Cohen's d and a bootstrap CI on pooled SE losses, DM under four losses,
/// GW conditioned on the high-VIX indicator, and the MCS over all models.
BatteryResult stats_battery(const ForecastPanel& panel, const BatteryOptions& opts = {});

/// Throws DataError when `report` does not have the stats_battery layout.
void check_stats_report(const nlohmann::json& report);

}  // namespace tracejudge
