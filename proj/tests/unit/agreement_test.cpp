#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "tracejudge/agreement.hpp"
#include "tracejudge/error.hpp"

namespace tj = tracejudge;
using tj::Dimension;

namespace {

tj::RatingMatrix matrix(const std::vector<std::vector<std::optional<int>>>& by_rater) {
  tj::RatingMatrix m;
  for (std::size_t r = 0; r < by_rater.size(); ++r) m.raters.push_back("r" + std::to_string(r));
  for (std::size_t u = 0; u < by_rater[0].size(); ++u) m.units.push_back("u" + std::to_string(u));
  m.values = by_rater;
  return m;
}

tj::Judgment judgment(const std::string& judge, const std::string& ep, std::array<int, 6> s) {
  tj::Judgment j;
  j.judge_id = judge;
  j.episode_id = ep;
  j.scores.values = s;
  return j;
}

// 3 raters x 12 units with disagreements and two missing cells.
tj::RatingMatrix fixture12() {
  using O = std::optional<int>;
  return matrix({{1, 2, 3, 3, 2, 1, 4, 1, 2, 5, O{}, 3},
                 {1, 2, 3, 3, 2, 2, 4, 1, 2, 5, 1, 3},
                 {O{}, 3, 3, 3, 2, 1, 4, 1, 3, 4, 1, 4}});
}

}  // namespace

TEST(Krippendorff, IdenticalColumnsGiveOne) {
  const auto m = matrix({{1, 2, 3, 4, 5, 2}, {1, 2, 3, 4, 5, 2}});
  EXPECT_DOUBLE_EQ(*tj::krippendorff_alpha(m), 1.0);
}

TEST(Krippendorff, FrozenTwelveUnitFixture) {
  // Exact value 378577/418540 from the coincidence-matrix formulation in rational arithmetic.
  const auto m = fixture12();
  const auto oracle = tj_test::oracle::krippendorff_ordinal(m);
  ASSERT_TRUE(oracle);
  EXPECT_NEAR(*oracle, 378577.0 / 418540.0, 1e-12);
  EXPECT_NEAR(*tj::krippendorff_alpha(m), *oracle, 1e-9);
}

TEST(Krippendorff, SingleRatingPerUnitIsDegenerate) {
  using O = std::optional<int>;
  const auto m = matrix({{1, O{}, 3}, {O{}, 2, O{}}});
  EXPECT_FALSE(tj::krippendorff_alpha(m));
}

TEST(Krippendorff, SingleCategoryIsDegenerate) {
  EXPECT_FALSE(tj::krippendorff_alpha(matrix({{3, 3, 3}, {3, 3, 3}})));
}

TEST(Krippendorff, RandomMatricesMatchOracle) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    const auto m = tj_test::random_ratings(rng, 3, 20, 5, i % 3 == 0 ? 0.2 : 0.0);
    const auto got = tj::krippendorff_alpha(m);
    const auto want = tj_test::oracle::krippendorff_ordinal(m);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_NEAR(*got, *want, 1e-9);
    }
  }
}

TEST(Krippendorff, InvariantToUnitAndRaterOrder) {
  std::mt19937_64 rng(78);
  for (int i = 0; i < 50; ++i) {
    auto m = tj_test::random_ratings(rng, 4, 15, 5, 0.1);
    const auto base = tj::krippendorff_alpha(m);
    std::shuffle(m.values.begin(), m.values.end(), rng);
    std::vector<std::size_t> perm(m.units.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto shuffled = m;
    for (std::size_t r = 0; r < m.values.size(); ++r) {
      for (std::size_t u = 0; u < perm.size(); ++u) shuffled.values[r][u] = m.values[r][perm[u]];
    }
    const auto moved = tj::krippendorff_alpha(shuffled);
    ASSERT_EQ(base.has_value(), moved.has_value());
    if (base) {
      EXPECT_NEAR(*base, *moved, 1e-12);
    }
  }
}

TEST(Krippendorff, MovingARatingAwayLowersAlpha) {
  auto m = matrix({{1, 2, 3, 4, 5, 3}, {1, 2, 3, 4, 5, 3}, {1, 2, 3, 4, 4, 3}});
  const double before = *tj::krippendorff_alpha(m);
  m.values[2][4] = 3;
  const double after = *tj::krippendorff_alpha(m);
  EXPECT_LT(after, before);
}

TEST(Kappa, IdenticalVectors) {
  const std::vector<int> a{1, 2, 3, 1, 2};
  EXPECT_DOUBLE_EQ(*tj::cohen_kappa(a, a), 1.0);
}

TEST(Kappa, PerfectDisagreement) {
  const std::vector<int> a{1, 1, 2, 2};
  const std::vector<int> b{2, 2, 1, 1};
  EXPECT_DOUBLE_EQ(*tj::cohen_kappa(a, b), -1.0);
}

TEST(Kappa, ConstantEqualRatersDegenerate) {
  const std::vector<int> a{3, 3, 3};
  EXPECT_FALSE(tj::cohen_kappa(a, a));
}

TEST(Kappa, IndependentRatersNearZero) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> u(1, 5);
  std::vector<int> a(10000), b(10000);
  for (auto& v : a) v = u(rng);
  for (auto& v : b) v = u(rng);
  EXPECT_NEAR(*tj::cohen_kappa(a, b), 0.0, 0.05);
}

TEST(Kappa, SymmetricAndMatchesOracle) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> u(1, 4);
  for (int i = 0; i < 200; ++i) {
    std::vector<int> a(25), b(25);
    for (std::size_t k = 0; k < 25; ++k) {
      a[k] = u(rng);
      b[k] = u(rng) <= 2 ? a[k] : u(rng);
    }
    const auto ab = tj::cohen_kappa(a, b);
    const auto ba = tj::cohen_kappa(b, a);
    const auto want = tj_test::oracle::cohen_kappa(a, b);
    ASSERT_TRUE(ab && ba && want);
    EXPECT_DOUBLE_EQ(*ab, *ba);
    EXPECT_NEAR(*ab, *want, 1e-9);
  }
}

TEST(Icc, IdenticalColumnsAndRaterOffset) {
  EXPECT_DOUBLE_EQ(*tj::icc_consistency(matrix({{1, 2, 3, 4}, {1, 2, 3, 4}})), 1.0);
  EXPECT_NEAR(*tj::icc_consistency(matrix({{1, 2, 3, 4}, {2, 3, 4, 5}})), 1.0, 1e-12);
}

TEST(Icc, ThreeByTenFixtureMatchesAnova) {
  const auto m = matrix({{4, 3, 5, 2, 4, 1, 3, 5, 2, 4}, {4, 2, 5, 3, 4, 2, 3, 4, 2, 5}, {5, 3, 4, 2, 3, 1, 4, 5, 1, 4}});
  const auto oracle = tj_test::oracle::icc31(m);
  ASSERT_TRUE(oracle);
  EXPECT_NEAR(*tj::icc_consistency(m), *oracle, 1e-12);
}

TEST(Icc, ZeroBetweenUnitVarianceIsDegenerate) {
  EXPECT_FALSE(tj::icc_consistency(matrix({{3, 3, 3}, {3, 3, 3}})));
}

TEST(Consensus, MeansAndComposite) {
  std::vector<tj::Judgment> js{judgment("a", "e", {2, 5, 5, 5, 5, 5}), judgment("b", "e", {3, 5, 5, 5, 5, 5}),
                               judgment("c", "e", {4, 5, 5, 5, 5, 5})};
  const auto c = tj::consensus(js);
  EXPECT_DOUBLE_EQ(c.mean_scores[Dimension::RD], 3.0);
  std::reverse(js.begin(), js.end());
  EXPECT_EQ(tj::consensus(js).mean_scores, c.mean_scores);
  const std::vector<tj::Judgment> fives{judgment("a", "e", {5, 5, 5, 5, 5, 5})};
  EXPECT_DOUBLE_EQ(tj::consensus(fives).composite, 5.0);
  EXPECT_EQ(tj::consensus(fives).mean_scores[Dimension::AD], 5.0);
}

TEST(Consensus, MixedEpisodesRejected) {
  const std::vector<tj::Judgment> js{judgment("a", "e1", {3, 3, 3, 3, 3, 3}), judgment("b", "e2", {3, 3, 3, 3, 3, 3})};
  EXPECT_THROW(tj::consensus(js), tj::DataError);
}

TEST(ScoreVariance, HandComputed) {
  const std::vector<tj::Judgment> same{judgment("a", "e", {3, 3, 3, 3, 3, 3}), judgment("b", "e", {3, 3, 3, 3, 3, 3})};
  const std::vector<tj::ConsensusScores> zero{tj::consensus(same)};
  EXPECT_DOUBLE_EQ(tj::score_variance(zero), 0.0);

  const std::vector<tj::Judgment> spread{judgment("a", "e", {3, 3, 3, 3, 3, 3}), judgment("b", "e", {4, 4, 4, 4, 4, 4}),
                                         judgment("c", "e", {5, 5, 5, 5, 5, 5})};
  const std::vector<tj::ConsensusScores> one{tj::consensus(spread)};
  EXPECT_NEAR(tj::score_variance(one), 1.0, 1e-12);

  const std::vector<tj::Judgment> single{judgment("a", "e", {3, 3, 3, 3, 3, 3})};
  const std::vector<tj::ConsensusScores> lonely{tj::consensus(single)};
  EXPECT_THROW(tj::score_variance(lonely), tj::DataError);
}

TEST(RatingCsv, RoundTripWithMissingCells) {
  const auto m = fixture12();
  const auto path = tj_test::scratch_dir("ratings") / "r.csv";
  tj::write_rating_csv(path, m);
  const auto back = tj::read_rating_csv(path);
  EXPECT_EQ(back.raters, m.raters);
  EXPECT_EQ(back.units, m.units);
  EXPECT_EQ(back.values, m.values);
}

TEST(Report, PairwiseKappaAndAnnotations) {
  std::vector<tj::Judgment> js;
  for (int e = 0; e < 6; ++e) {
    const int s = 1 + e % 5;
    for (const char* judge : {"a", "b", "c"}) js.push_back(judgment(judge, "e" + std::to_string(e), {s, s, s, s, s, s}));
  }
  const auto report = tj::agreement_report(js);
  const auto& rd = report["dimensions"]["RD"];
  EXPECT_DOUBLE_EQ(rd["krippendorff_alpha"].get<double>(), 1.0);
  EXPECT_EQ(rd["alpha_annotation"], "reliable");
  EXPECT_EQ(rd["pairwise_kappa"].size(), 3u);
  EXPECT_DOUBLE_EQ(report["mean_composite_sd"].get<double>(), 0.0);
}
