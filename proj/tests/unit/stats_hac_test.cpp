#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tracejudge/error.hpp"
#include "tracejudge/stats/hac.hpp"

namespace st = tracejudge::stats;

namespace {

std::vector<double> gaussian(std::uint64_t seed, std::size_t n, double mu = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mu, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

st::LossPanel panel_from(const std::vector<std::vector<std::vector<double>>>& losses,
                         std::vector<std::string> assets) {
  st::LossPanel p;
  p.models = {"first", "second"};
  p.assets = std::move(assets);
  for (std::size_t t = 0; t < losses[0][0].size(); ++t) p.days.push_back("d" + std::to_string(t));
  p.losses = losses;
  return p;
}

}  // namespace

TEST(Bandwidth, RuleOfThumb) {
  EXPECT_EQ(st::default_bandwidth(100), 4u);
  EXPECT_EQ(st::default_bandwidth(2267), 8u);
}

TEST(NeweyWest, ZeroBandwidthIsPlainVariance) {
  const std::vector<double> x{1, 2, 4, 7};
  // mean 3.5; squared deviations 6.25, 2.25, 0.25, 12.25 over T.
  EXPECT_DOUBLE_EQ(st::newey_west_variance(x, 0), 21.0 / 4.0);
  EXPECT_THROW(st::newey_west_variance(x, 4), tracejudge::DataError);
}

TEST(NeweyWest, IidBandwidthBarelyMatters) {
  const auto x = gaussian(1, 50000);
  const double v0 = st::newey_west_variance(x, 0);
  const double v8 = st::newey_west_variance(x, 8);
  EXPECT_LT(std::abs(v8 - v0) / v0, 0.10);
}

TEST(Harvey, ClosedForm) {
  EXPECT_DOUBLE_EQ(st::harvey_factor(100, 1), std::sqrt(99.0 / 100.0));
  EXPECT_DOUBLE_EQ(st::harvey_factor(50, 3), std::sqrt((51.0 - 6.0 + 6.0 / 50.0) / 50.0));
}

TEST(Dm, IdenticalLossesDegenerate) {
  const auto x = gaussian(2, 300);
  EXPECT_TRUE(st::dm_test(x, x).degenerate);
}

TEST(Dm, AntisymmetricAndSignConvention) {
  auto a = gaussian(3, 400);
  auto b = gaussian(4, 400, 0.3);
  for (auto& v : a) v = v * v;
  for (auto& v : b) v = v * v;
  const auto ab = st::dm_test(a, b, 1);
  const auto ba = st::dm_test(b, a, 1);
  EXPECT_NEAR(ab.statistic, -ba.statistic, 1e-12);
  EXPECT_NEAR(ab.p_value, ba.p_value, 1e-12);
  EXPECT_LT(ab.statistic, 0.0);
}

TEST(Dm, MismatchedLengthsRejected) {
  EXPECT_THROW(st::dm_test(gaussian(1, 10), gaussian(2, 11)), tracejudge::DataError);
}

TEST(Loss, KindsOnHandValues) {
  const std::vector<double> e{1.0, -2.0};
  const std::vector<double> y{50.0, 100.0};
  EXPECT_EQ(st::loss_series(e, y, st::LossKind::SE), (std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(st::loss_series(e, y, st::LossKind::AE), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(st::loss_series(e, y, st::LossKind::MAPE), (std::vector<double>{0.02, 0.02}));
}

TEST(Loss, PerfectForecastIsZeroLoss) {
  const std::vector<double> e(3, 0.0);
  const std::vector<double> y{1, 2, 3};
  for (auto k : {st::LossKind::SE, st::LossKind::AE, st::LossKind::MAPE}) {
    for (double v : st::loss_series(e, y, k)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Loss, QlikeMatchesOracleAndValidatesProxy) {
  const auto r = gaussian(5, 120);
  std::vector<double> ret(r.size()), err(r.size()), y(r.size(), 1.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    ret[i] = 0.01 * r[i];
    err[i] = 0.005 * r[(i + 7) % r.size()];
  }
  const auto proxy = st::realized_variance_proxy(ret, 22);
  const auto got = st::loss_series(err, y, st::LossKind::QLIKE, proxy);
  const auto want = tj_test::oracle::qlike(err, ret);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12 * std::abs(want[i]));

  std::vector<double> bad(proxy.size(), 0.0);
  EXPECT_THROW(st::loss_series(err, y, st::LossKind::QLIKE, bad), tracejudge::DataError);
  EXPECT_THROW(st::loss_series(err, y, st::LossKind::QLIKE), tracejudge::DataError);
  std::vector<double> zero_y(y.size(), 0.0);
  EXPECT_THROW(st::loss_series(err, zero_y, st::LossKind::MAPE), tracejudge::DataError);
}

TEST(Gw, ZeroDifferentialIsZeroWald) {
  const std::vector<std::vector<double>> d(3, std::vector<double>(60, 0.0));
  std::vector<double> c(60);
  for (std::size_t t = 0; t < c.size(); ++t) c[t] = t % 4 == 0 ? 1.0 : 0.0;
  const auto r = st::gw_test(d, c);
  EXPECT_EQ(r.extras.at("beta0"), 0.0);
  EXPECT_EQ(r.extras.at("beta1"), 0.0);
  EXPECT_EQ(r.statistic, 0.0);
}

TEST(Gw, ConstantDifferentialRecoveredInIntercept) {
  const std::vector<std::vector<double>> d(2, std::vector<double>(80, 0.7));
  std::vector<double> c(80);
  for (std::size_t t = 0; t < c.size(); ++t) c[t] = t % 3 == 0 ? 1.0 : 0.0;
  const auto r = st::gw_test(d, c);
  EXPECT_NEAR(r.extras.at("beta0"), 0.7, 1e-12);
  EXPECT_NEAR(r.extras.at("beta1"), 0.0, 1e-12);
}

TEST(Gw, ConstantConditioningRejected) {
  const std::vector<std::vector<double>> d{gaussian(6, 50)};
  const std::vector<double> c(50, 1.0);
  EXPECT_THROW(st::gw_test(d, c), tracejudge::DataError);
}

TEST(Panel, AssetRelabellingLeavesPooledDmUnchanged) {
  std::vector<std::vector<std::vector<double>>> losses(2, std::vector<std::vector<double>>(3));
  for (std::size_t a = 0; a < 3; ++a) {
    losses[0][a] = gaussian(10 + a, 250);
    losses[1][a] = gaussian(20 + a, 250, 0.2);
    for (auto& v : losses[0][a]) v *= v;
    for (auto& v : losses[1][a]) v *= v;
  }
  const auto p = panel_from(losses, {"AAA", "BBB", "CCC"});
  auto q = losses;
  std::swap(q[0][0], q[0][2]);
  std::swap(q[1][0], q[1][2]);
  const auto p2 = panel_from(q, {"ZZZ", "BBB", "AAA"});
  const auto r1 = st::dm_test_pooled(p, 0, 1);
  const auto r2 = st::dm_test_pooled(p2, 0, 1);
  EXPECT_NEAR(r1.statistic, r2.statistic, 1e-12);
  const auto per = st::dm_test_per_asset(p, 0, 1);
  ASSERT_EQ(per.size(), 3u);
}

TEST(Panel, MisalignedPanelNamed) {
  std::vector<std::vector<std::vector<double>>> losses(2, std::vector<std::vector<double>>(2, std::vector<double>(5, 1.0)));
  losses[1][1].pop_back();
  const auto p = panel_from(losses, {"AAA", "BBB"});
  try {
    p.validate();
    FAIL() << "misaligned panel accepted";
  } catch (const tracejudge::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("BBB"), std::string::npos);
  }
}
