#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/dimension.hpp"
#include "tracejudge/judge.hpp"

namespace tracejudge {

/// values[r][u]: rating of unit u by rater r, nullopt when missing.
struct RatingMatrix {
  std::vector<std::string> raters;
  std::vector<std::string> units;
  std::vector<std::vector<std::optional<int>>> values;

  void validate() const;
};

/// Units as rows, raters as columns, blank cells missing.
RatingMatrix read_rating_csv(const std::filesystem::path& path);
void write_rating_csv(const std::filesystem::path& path, const RatingMatrix& m);

struct ConsensusScores {
  std::string episode_id;
  DimMap<double> mean_scores;
  std::map<std::string, DimMap<int>> per_judge;
  double composite = 0.0;
};

/// Per-dimension mean over judges; independent of input order. Throws DataError on mixed
/// episode ids or an empty list.
ConsensusScores consensus(std::span<const Judgment> judgments);

double composite(const DimMap<int>& scores);

/// Ordinal Krippendorff alpha; nullopt when there are no pairable values or a single
/// observed category.
std::optional<double> krippendorff_alpha(const RatingMatrix& m);

/// Unweighted Cohen kappa; nullopt when chance agreement is 1.
std::optional<double> cohen_kappa(std::span<const int> a, std::span<const int> b);

/// ICC(3,1), two-way mixed consistency; nullopt when the denominator vanishes.
std::optional<double> icc_consistency(const RatingMatrix& m);

/// Mean over episodes of the n-1 sd of per-judge composites. Throws DataError when any
/// episode has fewer than two judges.
double score_variance(std::span<const ConsensusScores> per_episode);

/// Rating matrix for one dimension: raters = judge ids (sorted), units = episode ids.
RatingMatrix rating_matrix(std::span<const Judgment> judgments, Dimension d);

inline constexpr double kAlphaTentative = 0.667;
inline constexpr double kAlphaReliable = 0.800;

/// Per-dimension alpha, pairwise kappa and composite spread for a judgment set.
nlohmann::ordered_json agreement_report(std::span<const Judgment> judgments);

}  // namespace tracejudge
