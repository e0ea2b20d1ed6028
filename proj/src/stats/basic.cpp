#include "tracejudge/stats/basic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "tracejudge/error.hpp"

namespace tracejudge::stats {

nlohmann::ordered_json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::ordered_json to_json(const TestResult& r) {
  nlohmann::ordered_json j;
  j["statistic"] = number_or_null(r.statistic);
  j["p_value"] = number_or_null(r.p_value);
  j["degenerate"] = r.degenerate;
  if (!r.note.empty()) j["note"] = r.note;
  auto& extras = j["extras"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.extras) extras[k] = number_or_null(v);
  return j;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw DataError("mean of empty series");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw DataError("variance needs at least 2 observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

TestResult paired_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("paired_t: lengths differ ({} vs {})", a.size(), b.size()));
  }
  if (a.size() < 2) throw DataError("paired_t needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double md = mean(d);
  const double sd = stddev(d);
  if (sd == 0.0) {
    auto r = TestResult::make_degenerate("differences have zero variance");
    r.extras = {{"mean_diff", md}, {"sd_diff", 0.0}, {"df", n - 1}};
    return r;
  }
  TestResult r;
  r.statistic = md / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1);
  r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic))));
  r.extras = {{"mean_diff", md}, {"sd_diff", sd}, {"cohen_d", md / sd}, {"df", n - 1}};
  return r;
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("pearson: lengths differ");
  if (x.size() < 2) throw DataError("pearson needs at least 2 pairs");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: lengths differ");
  if (x.size() < 3) throw DataError("spearman needs at least 3 pairs");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double quantile_sorted(std::span<const double> s, double q) {
  if (s.empty()) throw DataError("quantile of empty data");
  const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

namespace {

double one_resample(std::span<const double> data, const Statistic& metric, std::uint64_t seed,
                    std::size_t b, std::vector<double>& buf) {
  std::mt19937_64 rng(derive_seed(seed, b));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  for (auto& v : buf) v = data[pick(rng)];
  return metric(buf);
}

}  // namespace

std::vector<double> bootstrap_distribution(std::span<const double> data, const Statistic& metric,
                                           std::size_t resamples, std::uint64_t seed, Exec exec) {
  if (data.empty()) throw DataError("bootstrap of empty data");
  if (resamples == 0) throw DataError("bootstrap needs at least one resample");
  std::vector<double> stats(resamples);
  if (exec == Exec::Serial) {
    std::vector<double> buf(data.size());
    for (std::size_t b = 0; b < resamples; ++b) stats[b] = one_resample(data, metric, seed, b, buf);
  } else {
    const auto n = static_cast<std::int64_t>(resamples);
#pragma omp parallel
    {
      std::vector<double> buf(data.size());
#pragma omp for schedule(static)
      for (std::int64_t b = 0; b < n; ++b) {
        stats[static_cast<std::size_t>(b)] =
            one_resample(data, metric, seed, static_cast<std::size_t>(b), buf);
      }
    }
  }
  std::sort(stats.begin(), stats.end());
  return stats;
}

Interval bootstrap_ci(std::span<const double> data, const Statistic& metric,
                      const BootstrapOptions& opts) {
  if (!(opts.level > 0.0 && opts.level < 1.0)) throw DataError("bootstrap level must be in (0, 1)");
  const auto dist = bootstrap_distribution(data, metric, opts.resamples, opts.seed, opts.exec);
  const double tail = (1.0 - opts.level) / 2.0;
  return {quantile_sorted(dist, tail), quantile_sorted(dist, 1.0 - tail)};
}

double bonferroni(double p, std::size_t comparisons) {
  return std::min(1.0, p * static_cast<double>(comparisons));
}

}  // namespace tracejudge::stats
