#include "tracejudge/stats/hac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tracejudge/error.hpp"
#include "tracejudge/stats/basic.hpp"

namespace tracejudge::stats {

namespace {
constexpr double kVarianceFloor = 1e-12;

/// Unfloored Bartlett long-run variance.
double nw_raw(std::span<const double> x, std::size_t bw) {
  const std::size_t T = x.size();
  const double m = mean(x);
  const double invT = 1.0 / static_cast<double>(T);
  auto gamma = [&](std::size_t j) {
    double s = 0.0;
    for (std::size_t t = j; t < T; ++t) s += (x[t] - m) * (x[t - j] - m);
    return s * invT;
  };
  double v = gamma(0);
  for (std::size_t j = 1; j <= bw; ++j) {
    const double w = 1.0 - static_cast<double>(j) / static_cast<double>(bw + 1);
    v += 2.0 * w * gamma(j);
  }
  return v;
}

std::size_t resolve_bandwidth(std::size_t T, std::optional<std::size_t> bw) {
  const std::size_t b = bw.value_or(default_bandwidth(T));
  if (b >= T) throw DataError(fmt::format("bandwidth {} must be below series length {}", b, T));
  return b;
}

double two_sided_t(double stat, double df) {
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat))));
}
}  // namespace

std::size_t default_bandwidth(std::size_t T) {
  return static_cast<std::size_t>(
      std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

double newey_west_variance(std::span<const double> x, std::optional<std::size_t> bandwidth) {
  if (x.size() < 2) throw DataError("Newey-West variance needs at least 2 observations");
  const double v = nw_raw(x, resolve_bandwidth(x.size(), bandwidth));
  if (v < kVarianceFloor) {
    if (v < 0.0) spdlog::warn("Newey-West variance {} negative; floored at {}", v, kVarianceFloor);
    return kVarianceFloor;
  }
  return v;
}

double harvey_factor(std::size_t T, std::size_t h) {
  const double t = static_cast<double>(T);
  const double hh = static_cast<double>(h);
  return std::sqrt((t + 1.0 - 2.0 * hh + hh * (hh - 1.0) / t) / t);
}

TestResult dm_test(std::span<const double> a, std::span<const double> b, std::size_t horizon,
                   std::optional<std::size_t> bandwidth) {
  if (a.size() != b.size()) {
    throw DataError(fmt::format("dm_test: lengths differ ({} vs {})", a.size(), b.size()));
  }
  if (horizon == 0) throw DataError("dm_test: horizon must be at least 1");
  const std::size_t T = a.size();
  if (T < 2 || T <= horizon) throw DataError("dm_test: series too short for the horizon");
  std::vector<double> d(T);
  for (std::size_t t = 0; t < T; ++t) d[t] = a[t] - b[t];
  const std::size_t bw = resolve_bandwidth(T, bandwidth);
  const double raw = nw_raw(d, bw);
  const double md = mean(d);
  const double hf = harvey_factor(T, horizon);
  std::map<std::string, double> extras{{"mean_diff", md},
                                       {"bandwidth", static_cast<double>(bw)},
                                       {"harvey_factor", hf},
                                       {"df", static_cast<double>(T - 1)}};
  if (raw <= 0.0) {
    auto r = TestResult::make_degenerate("loss differential has zero long-run variance");
    extras["nw_variance"] = 0.0;
    r.extras = std::move(extras);
    return r;
  }
  const double lrv = std::max(raw, kVarianceFloor);
  const double dm = md / std::sqrt(lrv / static_cast<double>(T));
  TestResult r;
  r.statistic = dm * hf;
  r.p_value = two_sided_t(r.statistic, static_cast<double>(T - 1));
  extras["nw_variance"] = lrv;
  extras["dm_raw"] = dm;
  r.extras = std::move(extras);
  return r;
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::SE:
      return "SE";
    case LossKind::AE:
      return "AE";
    case LossKind::MAPE:
      return "MAPE";
    case LossKind::QLIKE:
      return "QLIKE";
  }
  return "SE";
}

std::optional<LossKind> parse_loss_kind(std::string_view s) {
  for (auto k : {LossKind::SE, LossKind::AE, LossKind::MAPE, LossKind::QLIKE}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<double> loss_series(std::span<const double> e, std::span<const double> y,
                                LossKind kind, std::span<const double> proxy) {
  if (kind == LossKind::MAPE && y.size() != e.size()) {
    throw DataError("loss_series: actuals not aligned with errors");
  }
  if (kind == LossKind::QLIKE && proxy.size() != e.size()) {
    throw DataError("loss_series: variance proxy not aligned with errors");
  }
  std::vector<double> out(e.size());
  for (std::size_t t = 0; t < e.size(); ++t) {
    switch (kind) {
      case LossKind::SE:
        out[t] = e[t] * e[t];
        break;
      case LossKind::AE:
        out[t] = std::abs(e[t]);
        break;
      case LossKind::MAPE:
        if (y[t] == 0.0) throw DataError(fmt::format("MAPE: actual is zero at index {}", t));
        out[t] = std::abs(e[t]) / std::abs(y[t]);
        break;
      case LossKind::QLIKE:
        if (!(proxy[t] > 0.0)) {
          throw DataError(fmt::format("QLIKE: variance proxy not positive at index {}", t));
        }
        out[t] = std::log(proxy[t]) + e[t] * e[t] / proxy[t];
        break;
    }
  }
  return out;
}

std::vector<double> realized_variance_proxy(std::span<const double> r, std::size_t window) {
  if (window == 0) throw DataError("variance proxy window must be positive");
  std::vector<double> out(r.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    acc += r[t] * r[t];
    if (t >= window) acc -= r[t - window] * r[t - window];
    const std::size_t n = std::min(t + 1, window);
    out[t] = acc / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Panels

std::size_t LossPanel::model_index(std::string_view id) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i] == id) return i;
  }
  throw DataError(fmt::format("unknown model '{}'", id));
}

void LossPanel::validate() const {
  if (losses.size() != models.size()) throw DataError("loss panel: model count mismatch");
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (losses[m].size() != assets.size()) {
      throw DataError(fmt::format("loss panel: model {} has {} assets, expected {}", models[m],
                                  losses[m].size(), assets.size()));
    }
    for (std::size_t a = 0; a < assets.size(); ++a) {
      if (losses[m][a].size() != days.size()) {
        throw DataError(fmt::format("loss panel: misaligned key ({}, {}): {} days, expected {}",
                                    models[m], assets[a], losses[m][a].size(), days.size()));
      }
      for (std::size_t t = 0; t < days.size(); ++t) {
        if (!std::isfinite(losses[m][a][t])) {
          throw DataError(fmt::format("loss panel: non-finite loss at ({}, {}, {})", models[m],
                                      assets[a], days[t]));
        }
      }
    }
  }
}

std::vector<double> LossPanel::pooled(std::size_t m) const {
  std::vector<double> out(days.size(), 0.0);
  for (const auto& series : losses.at(m)) {
    for (std::size_t t = 0; t < out.size(); ++t) out[t] += series[t];
  }
  for (auto& v : out) v /= static_cast<double>(assets.size());
  return out;
}

LossPanel read_loss_panel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read loss panel {}", path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty loss panel", path));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "model,asset,date,loss") {
    throw DataError(fmt::format("{}: header must be model,asset,date,loss", path));
  }
  LossPanel panel;
  std::map<std::string, std::size_t> model_ix;
  std::map<std::string, std::size_t> asset_ix;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, double> cells;
  std::map<std::string, int> dates;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos; start = pos + 1) {
      f.push_back(line.substr(start, pos - start));
    }
    f.push_back(line.substr(start));
    if (f.size() != 4) throw DataError(fmt::format("{}:{}: expected 4 fields", path, lineno));
    auto [mi, new_m] = model_ix.try_emplace(f[0], panel.models.size());
    if (new_m) panel.models.push_back(f[0]);
    auto [ai, new_a] = asset_ix.try_emplace(f[1], panel.assets.size());
    if (new_a) panel.assets.push_back(f[1]);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}:{}: invalid loss '{}'", path, lineno, f[3]));
    }
    if (!cells.emplace(std::tuple{mi->second, ai->second, f[2]}, v).second) {
      throw DataError(fmt::format("{}:{}: duplicate key ({}, {}, {})", path, lineno, f[0], f[1], f[2]));
    }
    dates[f[2]] = 0;
  }
  for (const auto& [d, _] : dates) panel.days.push_back(d);
  panel.losses.assign(panel.models.size(),
                      std::vector<std::vector<double>>(panel.assets.size(),
                                                       std::vector<double>(panel.days.size())));
  for (std::size_t m = 0; m < panel.models.size(); ++m) {
    for (std::size_t a = 0; a < panel.assets.size(); ++a) {
      for (std::size_t t = 0; t < panel.days.size(); ++t) {
        auto it = cells.find({m, a, panel.days[t]});
        if (it == cells.end()) {
          throw DataError(fmt::format("{}: misaligned panel, no loss for ({}, {}, {})", path,
                                      panel.models[m], panel.assets[a], panel.days[t]));
        }
        panel.losses[m][a][t] = it->second;
      }
    }
  }
  panel.validate();
  return panel;
}

std::vector<std::vector<double>> demeaned_differentials(const LossPanel& p, std::size_t first,
                                                        std::size_t second) {
  p.validate();
  std::vector<std::vector<double>> d(p.assets.size(), std::vector<double>(p.days.size()));
  double grand = 0.0;
  std::vector<double> asset_mean(p.assets.size(), 0.0);
  for (std::size_t a = 0; a < p.assets.size(); ++a) {
    for (std::size_t t = 0; t < p.days.size(); ++t) {
      d[a][t] = p.losses[first][a][t] - p.losses[second][a][t];
      asset_mean[a] += d[a][t];
    }
    asset_mean[a] /= static_cast<double>(p.days.size());
    grand += asset_mean[a];
  }
  grand /= static_cast<double>(p.assets.size());
  for (std::size_t a = 0; a < p.assets.size(); ++a) {
    for (auto& v : d[a]) v = v - asset_mean[a] + grand;
  }
  return d;
}

TestResult dm_test_pooled(const LossPanel& p, std::size_t first, std::size_t second,
                          std::size_t horizon, std::optional<std::size_t> bandwidth) {
  p.validate();
  return dm_test(p.pooled(first), p.pooled(second), horizon, bandwidth);
}

std::vector<TestResult> dm_test_per_asset(const LossPanel& p, std::size_t first,
                                          std::size_t second, std::size_t horizon,
                                          std::optional<std::size_t> bandwidth) {
  p.validate();
  std::vector<TestResult> out;
  for (std::size_t a = 0; a < p.assets.size(); ++a) {
    out.push_back(dm_test(p.losses[first][a], p.losses[second][a], horizon, bandwidth));
  }
  return out;
}

TestResult gw_test(const std::vector<std::vector<double>>& d, std::span<const double> cond,
                   std::optional<std::size_t> bandwidth) {
  if (d.empty()) throw DataError("gw_test: empty differential panel");
  const std::size_t T = cond.size();
  for (const auto& series : d) {
    if (series.size() != T) throw DataError("gw_test: panel and conditioning not aligned");
  }
  if (T < 3) throw DataError("gw_test: need at least 3 days");
  const auto [lo, hi] = std::minmax_element(cond.begin(), cond.end());
  if (*lo == *hi) throw DataError("gw_test: conditioning series is constant (rank-deficient design)");
  const std::size_t bw = resolve_bandwidth(T, bandwidth);
  const double N = static_cast<double>(d.size());

  Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
  Eigen::Vector2d xty = Eigen::Vector2d::Zero();
  std::vector<double> dsum(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (const auto& series : d) dsum[t] += series[t];
    const Eigen::Vector2d x(1.0, cond[t]);
    xtx += N * x * x.transpose();
    xty += x * dsum[t];
  }
  const Eigen::Matrix2d xtx_inv = xtx.inverse();
  const Eigen::Vector2d beta = xtx_inv * xty;

  std::vector<Eigen::Vector2d> g(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::Vector2d x(1.0, cond[t]);
    const double u = dsum[t] - N * x.dot(beta);
    g[t] = x * u;
  }
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (std::size_t t = 0; t < T; ++t) S += g[t] * g[t].transpose();
  for (std::size_t j = 1; j <= bw; ++j) {
    const double w = 1.0 - static_cast<double>(j) / static_cast<double>(bw + 1);
    Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
    for (std::size_t t = j; t < T; ++t) G += g[t] * g[t - j].transpose();
    S += w * (G + G.transpose());
  }
  const Eigen::Matrix2d V = xtx_inv * S * xtx_inv;

  std::map<std::string, double> extras{{"beta0", beta(0)},
                                       {"beta1", beta(1)},
                                       {"bandwidth", static_cast<double>(bw)},
                                       {"n", N * static_cast<double>(T)}};
  const double se0 = std::sqrt(std::max(V(0, 0), 0.0));
  const double se1 = std::sqrt(std::max(V(1, 1), 0.0));
  extras["se0"] = se0;
  extras["se1"] = se1;

  Eigen::FullPivLU<Eigen::Matrix2d> lu(V);
  if (S.norm() == 0.0 || !lu.isInvertible()) {
    auto r = TestResult::make_degenerate("HAC covariance is singular (zero residual variance)");
    if (beta.isZero(0.0)) {
      r.statistic = 0.0;
      r.p_value = 1.0;
    }
    r.extras = std::move(extras);
    return r;
  }
  extras["t0"] = beta(0) / se0;
  extras["t1"] = beta(1) / se1;
  TestResult r;
  r.statistic = beta.dot(lu.solve(beta));
  const boost::math::chi_squared chi2(2.0);
  r.p_value = boost::math::cdf(boost::math::complement(chi2, std::max(r.statistic, 0.0)));
  r.extras = std::move(extras);
  return r;
}

}  // namespace tracejudge::stats
