#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracejudge/stats/result.hpp"

namespace tracejudge::stats {

/// floor(4 (T/100)^(2/9)).
std::size_t default_bandwidth(std::size_t T);

/// Bartlett-kernel long-run variance: g0 + 2 sum_{j<=bw} (1 - j/(bw+1)) g_j with 1/T
/// autocovariances. Floored at 1e-12. Throws DataError when T < 2 or bw >= T.
double newey_west_variance(std::span<const double> x, std::optional<std::size_t> bandwidth = {});

/// sqrt((T + 1 - 2h + h(h-1)/T) / T).
double harvey_factor(std::size_t T, std::size_t h);

/// d = first - second. Negative statistic means `first` has lower loss.
/// extras: mean_diff, nw_variance, bandwidth, harvey_factor, dm_raw, df.
TestResult dm_test(std::span<const double> loss_first, std::span<const double> loss_second,
                   std::size_t horizon = 1, std::optional<std::size_t> bandwidth = {});

enum class LossKind { SE, AE, MAPE, QLIKE };

std::string_view to_string(LossKind k);
std::optional<LossKind> parse_loss_kind(std::string_view s);

/// Per-day loss of forecast errors e = y_hat - y. MAPE is a fraction, not percent.
/// QLIKE needs `variance_proxy` aligned with `errors`.
std::vector<double> loss_series(std::span<const double> errors, std::span<const double> actuals,
                                LossKind kind, std::span<const double> variance_proxy = {});

/// Trailing mean of squared returns over up to `window` observations (expanding at the start).
std::vector<double> realized_variance_proxy(std::span<const double> returns,
                                            std::size_t window = 22);

/// Loss values indexed [model][asset][day].
struct LossPanel {
  std::vector<std::string> models;
  std::vector<std::string> assets;
  std::vector<std::string> days;
  std::vector<std::vector<std::vector<double>>> losses;

  std::size_t model_index(std::string_view id) const;
  /// Throws DataError naming the first misaligned (model, asset) pair or non-finite value.
  void validate() const;
  /// Cross-sectional mean loss per day for one model.
  std::vector<double> pooled(std::size_t model) const;
};

/// Long-form CSV with header model,asset,date,loss.
LossPanel read_loss_panel_csv(const std::string& path);

/// Asset-demeaned differentials plus the grand mean, stacked [asset][day].
std::vector<std::vector<double>> demeaned_differentials(const LossPanel& panel, std::size_t first,
                                                        std::size_t second);

/// DM on the cross-sectional mean differential (equals the asset fixed-effects pooled mean).
TestResult dm_test_pooled(const LossPanel& panel, std::size_t first, std::size_t second,
                          std::size_t horizon = 1, std::optional<std::size_t> bandwidth = {});

/// One DM test per asset.
std::vector<TestResult> dm_test_per_asset(const LossPanel& panel, std::size_t first,
                                          std::size_t second, std::size_t horizon = 1,
                                          std::optional<std::size_t> bandwidth = {});

/// Pooled OLS of d[a][t] on (1, cond[t]) with a Bartlett HAC covariance over time of the
/// cross-sectionally summed scores. Wald on both coefficients against chi2(2).
/// extras: beta0, beta1, se0, se1, t0, t1, bandwidth, n.
TestResult gw_test(const std::vector<std::vector<double>>& differentials,
                   std::span<const double> conditioning,
                   std::optional<std::size_t> bandwidth = {});

}  // namespace tracejudge::stats
