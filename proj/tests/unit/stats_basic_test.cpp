#include <cmath>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tracejudge/error.hpp"
#include "tracejudge/stats/basic.hpp"

namespace st = tracejudge::stats;
using tracejudge::Exec;

namespace {

double sample_mean(std::span<const double> x) { return st::mean(x); }

}  // namespace

TEST(PairedT, ZeroVarianceDifferencesAreDegenerate) {
  const std::vector<double> a{3, 4, 5, 6};
  const std::vector<double> b{2, 3, 4, 5};
  const auto r = st::paired_t(a, b);
  EXPECT_TRUE(r.degenerate);
}

TEST(PairedT, ZeroMeanDifferenceGivesZeroEffect) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 1, 4, 3};
  const auto r = st::paired_t(a, b);
  ASSERT_FALSE(r.degenerate);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.extras.at("cohen_d"), 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(PairedT, MatchesOracleOnRandomSamples) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t len = 5 + static_cast<std::size_t>(rep % 40);
    std::vector<double> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = n(rng);
      b[i] = a[i] + 0.3 * n(rng) + 0.1;
    }
    const auto r = st::paired_t(a, b);
    const auto o = tj_test::oracle::paired_t(a, b);
    EXPECT_NEAR(r.statistic, o.t, 1e-9 * (1.0 + std::abs(o.t)));
    EXPECT_NEAR(r.p_value, o.p, 1e-9);
    EXPECT_NEAR(r.extras.at("cohen_d"), o.d, 1e-9);
    EXPECT_EQ(r.extras.at("df"), static_cast<double>(len - 1));
  }
}

TEST(PairedT, LengthMismatchRejected) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{1, 2};
  EXPECT_THROW(st::paired_t(a, b), tracejudge::DataError);
}

TEST(Ranks, TiesAveraged) {
  const std::vector<double> x{10, 20, 20, 5};
  EXPECT_EQ(st::average_ranks(x), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, MonotoneTransformsAndConstants) {
  std::vector<double> x, y, z;
  for (int i = 1; i <= 30; ++i) {
    x.push_back(i);
    y.push_back(std::exp(0.2 * i));
    z.push_back(-i * i);
  }
  EXPECT_NEAR(*st::spearman(x, y), 1.0, 1e-12);
  EXPECT_NEAR(*st::spearman(x, z), -1.0, 1e-12);
  const std::vector<double> c(30, 2.0);
  EXPECT_FALSE(st::spearman(x, c));
}

TEST(Spearman, MatchesOracleWithTies) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> u(1, 5);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(25), y(25);
    for (std::size_t i = 0; i < 25; ++i) {
      x[i] = u(rng);
      y[i] = x[i] + u(rng);
    }
    const auto got = st::spearman(x, y);
    const auto want = tj_test::oracle::spearman(x, y);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(*got, *want, 1e-12);
    }
  }
}

TEST(Quantile, Type7Interpolation) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(st::quantile_sorted(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(st::quantile_sorted(s, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(st::quantile_sorted(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(st::quantile_sorted(s, 0.25), 1.75);
}

TEST(Bootstrap, ConstantDataCollapses) {
  const std::vector<double> c(40, 1.25);
  const auto ci = st::bootstrap_ci(c, sample_mean, {500, 0.95, 1, Exec::Serial});
  EXPECT_EQ(ci.lo, 1.25);
  EXPECT_EQ(ci.hi, 1.25);
}

TEST(Bootstrap, NestedLevels) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(80);
  for (auto& v : x) v = n(rng);
  const auto wide = st::bootstrap_ci(x, sample_mean, {2000, 0.95, 9});
  const auto narrow = st::bootstrap_ci(x, sample_mean, {2000, 0.5, 9});
  EXPECT_LE(wide.lo, narrow.lo);
  EXPECT_GE(wide.hi, narrow.hi);
}

TEST(Bootstrap, SerialAndParallelBitwiseEqual) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(200);
  for (auto& v : x) v = n(rng);
  const auto s = st::bootstrap_distribution(x, sample_mean, 3000, 17, Exec::Serial);
  const auto p = st::bootstrap_distribution(x, sample_mean, 3000, 17, Exec::Parallel);
  ASSERT_EQ(s.size(), p.size());
  EXPECT_EQ(std::memcmp(s.data(), p.data(), s.size() * sizeof(double)), 0);
}

TEST(Bootstrap, CoverageOfTheMean) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  int covered = 0;
  constexpr int kReps = 500;
  for (int rep = 0; rep < kReps; ++rep) {
    std::vector<double> x(100);
    for (auto& v : x) v = n(rng);
    const auto ci = st::bootstrap_ci(x, sample_mean, {1000, 0.95, static_cast<std::uint64_t>(rep)});
    covered += ci.lo <= 0.0 && 0.0 <= ci.hi;
  }
  EXPECT_NEAR(static_cast<double>(covered) / kReps, 0.95, 0.03);
}

TEST(Bonferroni, ScalesAndCaps) {
  EXPECT_DOUBLE_EQ(st::bonferroni(0.01, 6), 0.06);
  EXPECT_EQ(st::bonferroni(0.4, 6), 1.0);
}
