#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tracejudge/agreement.hpp"
#include "tracejudge/battery.hpp"
#include "tracejudge/trace.hpp"

namespace tj_test {

std::filesystem::path fixture(const std::string& name);
std::string read_file(const std::filesystem::path& p);
/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Valid trace with every field drawn at random; about a third carry error stats.
tracejudge::BehavioralTrace random_trace(std::mt19937_64& rng, std::int64_t day_index);
/// Five consecutive random traces with a consistent stratum.
tracejudge::Episode random_episode(std::mt19937_64& rng, const std::string& id);
/// The checked-in stable fixture episode.
tracejudge::Episode stable_episode();

/// Ratings in [1, categories]; each cell missing with probability `missing`.
tracejudge::RatingMatrix random_ratings(std::mt19937_64& rng, std::size_t raters,
                                        std::size_t units, int categories, double missing = 0.0);

/// Two-model panel ("post", "pre") where post's forecast errors are `post_scale` times
/// pre's, on a random-walk price grid.
tracejudge::ForecastPanel synthetic_panel(std::uint64_t seed, std::size_t assets, std::size_t days,
                                          double post_scale);

}  // namespace tj_test
