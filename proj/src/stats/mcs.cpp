#include "tracejudge/stats/mcs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "tracejudge/error.hpp"

namespace tracejudge::stats {

std::size_t geometric_block_length(double L, std::mt19937_64& rng) {
  if (!(L >= 1.0)) throw DataError("expected block length must be at least 1");
  if (L == 1.0) return 1;
  std::geometric_distribution<std::size_t> geo(1.0 / L);
  return geo(rng) + 1;
}

BlockResample stationary_block_indices(std::size_t n, double L, std::mt19937_64& rng) {
  if (n == 0) throw DataError("stationary bootstrap of an empty series");
  BlockResample out;
  out.indices.reserve(n);
  std::uniform_int_distribution<std::size_t> start_dist(0, n - 1);
  while (out.indices.size() < n) {
    const std::size_t start = start_dist(rng);
    const std::size_t len = geometric_block_length(L, rng);
    ++out.blocks;
    for (std::size_t k = 0; k < len && out.indices.size() < n; ++k) {
      out.indices.push_back((start + k) % n);
    }
  }
  return out;
}

std::vector<double> stationary_block_bootstrap(std::span<const double> series, double L,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto rs = stationary_block_indices(series.size(), L, rng);
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = series[rs.indices[i]];
  return out;
}

std::vector<std::string> McsResult::survivors(double level) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (p_values[i] >= 1.0 - level) out.push_back(models[i]);
  }
  return out;
}

namespace {

/// Row b holds each model's mean loss under bootstrap index set b.
std::vector<std::vector<double>> bootstrap_means(const std::vector<std::vector<double>>& losses,
                                                 const McsOptions& opts) {
  const std::size_t T = losses.front().size();
  const std::size_t M = losses.size();
  std::vector<std::vector<double>> boot(opts.resamples, std::vector<double>(M));
  auto fill = [&](std::size_t b) {
    std::mt19937_64 rng(derive_seed(opts.seed, b));
    const auto rs = stationary_block_indices(T, opts.block_len, rng);
    for (std::size_t m = 0; m < M; ++m) {
      double s = 0.0;
      for (std::size_t idx : rs.indices) s += losses[m][idx];
      boot[b][m] = s / static_cast<double>(T);
    }
  };
  if (opts.exec == Exec::Serial) {
    for (std::size_t b = 0; b < opts.resamples; ++b) fill(b);
  } else {
    const auto n = static_cast<std::int64_t>(opts.resamples);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < n; ++b) fill(static_cast<std::size_t>(b));
  }
  return boot;
}

}  // namespace

McsResult mcs(const std::vector<std::vector<double>>& losses,
              const std::vector<std::string>& models, const McsOptions& opts) {
  if (losses.size() < 2) throw DataError("MCS needs at least 2 models");
  if (models.size() != losses.size()) throw DataError("MCS: model ids not aligned with losses");
  const std::size_t T = losses.front().size();
  if (T < 2) throw DataError("MCS needs at least 2 observations");
  for (std::size_t m = 0; m < losses.size(); ++m) {
    if (losses[m].size() != T) {
      throw DataError(fmt::format("MCS: model {} has {} observations, expected {}", models[m],
                                  losses[m].size(), T));
    }
  }
  if (opts.resamples == 0) throw DataError("MCS needs at least one resample");

  const std::size_t M = losses.size();
  std::vector<double> mean_loss(M);
  for (std::size_t m = 0; m < M; ++m) {
    double s = 0.0;
    for (double v : losses[m]) s += v;
    mean_loss[m] = s / static_cast<double>(T);
  }
  const auto boot = bootstrap_means(losses, opts);
  const double B = static_cast<double>(opts.resamples);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  McsResult result;
  result.models = models;
  result.p_values.assign(M, 1.0);
  std::vector<std::size_t> alive(M);
  for (std::size_t m = 0; m < M; ++m) alive[m] = m;
  double running_max = 0.0;

  while (alive.size() > 1) {
    const double k = static_cast<double>(alive.size());
    double pool = 0.0;
    for (std::size_t m : alive) pool += mean_loss[m];
    pool /= k;

    // Centered bootstrap deviations of d_i = L_i - pool average.
    std::vector<double> d(alive.size());
    std::vector<double> var(alive.size(), 0.0);
    // Averaging equal losses need not reproduce them exactly; residuals at rounding scale are zero.
    double scale = 0.0;
    for (std::size_t m : alive) scale = std::max(scale, std::abs(mean_loss[m]));
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale);
    auto snap = [tol](double x) { return std::abs(x) <= tol ? 0.0 : x; };
    for (std::size_t i = 0; i < alive.size(); ++i) d[i] = snap(mean_loss[alive[i]] - pool);
    std::vector<double> dev(opts.resamples * alive.size());
    for (std::size_t b = 0; b < opts.resamples; ++b) {
      double bpool = 0.0;
      for (std::size_t m : alive) bpool += boot[b][m];
      bpool /= k;
      for (std::size_t i = 0; i < alive.size(); ++i) {
        const double x = snap(snap(boot[b][alive[i]] - bpool) - d[i]);
        dev[b * alive.size() + i] = x;
        var[i] += x * x;
      }
    }
    for (auto& v : var) v /= B;

    auto studentize = [&](double num, double v) {
      if (v > 0.0) return num / std::sqrt(v);
      if (num > 0.0) return kInf;
      if (num < 0.0) return -kInf;
      return 0.0;
    };
    std::size_t worst = 0;
    double tmax = -kInf;
    bool any_spread = false;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      const double t = studentize(d[i], var[i]);
      if (var[i] > 0.0 || d[i] != 0.0) any_spread = true;
      if (t > tmax) {
        tmax = t;
        worst = i;
      }
    }
    if (!any_spread) break;  // identical losses: everything left survives with p = 1

    std::size_t exceed = 0;
    for (std::size_t b = 0; b < opts.resamples; ++b) {
      double tb = -kInf;
      for (std::size_t i = 0; i < alive.size(); ++i) {
        tb = std::max(tb, var[i] > 0.0 ? dev[b * alive.size() + i] / std::sqrt(var[i]) : 0.0);
      }
      if (tb >= tmax) ++exceed;
    }
    const double p = static_cast<double>(exceed) / B;
    running_max = std::max(running_max, p);
    const std::size_t eliminated = alive[worst];
    result.p_values[eliminated] = running_max;
    result.elimination.push_back(eliminated);
    result.elimination_stats.push_back(tmax);
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  return result;
}

McsResult mcs(const LossPanel& panel, const McsOptions& opts) {
  panel.validate();
  std::vector<std::vector<double>> pooled;
  for (std::size_t m = 0; m < panel.models.size(); ++m) pooled.push_back(panel.pooled(m));
  return mcs(pooled, panel.models, opts);
}

}  // namespace tracejudge::stats
