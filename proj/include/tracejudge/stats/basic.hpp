#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tracejudge/parallel.hpp"
#include "tracejudge/stats/result.hpp"

namespace tracejudge::stats {

double mean(std::span<const double> x);
/// Sample variance with denominator n-1.
double variance(std::span<const double> x);
double stddev(std::span<const double> x);

/// Paired t on a - b, two-sided, n-1 df. extras: mean_diff, sd_diff, cohen_d, df.
TestResult paired_t(std::span<const double> a, std::span<const double> b);

/// 1-based ranks with ties assigned their average rank.
std::vector<double> average_ranks(std::span<const double> x);

/// Pearson correlation; nullopt when either input is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks; nullopt when either input is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// Linear-interpolation quantile (type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

using Statistic = std::function<double(std::span<const double>)>;

struct BootstrapOptions {
  std::size_t resamples = 10000;
  double level = 0.95;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile interval from iid resampling with replacement. Resample b draws from an
/// engine seeded by derive_seed(seed, b), so Serial and Parallel agree bitwise.
Interval bootstrap_ci(std::span<const double> data, const Statistic& metric,
                      const BootstrapOptions& opts = {});

/// The sorted bootstrap distribution behind bootstrap_ci.
std::vector<double> bootstrap_distribution(std::span<const double> data, const Statistic& metric,
                                           std::size_t resamples, std::uint64_t seed, Exec exec);

double bonferroni(double p, std::size_t comparisons);

}  // namespace tracejudge::stats
