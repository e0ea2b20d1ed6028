#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tracejudge/parallel.hpp"
#include "tracejudge/stats/hac.hpp"

namespace tracejudge::stats {

struct BlockResample {
  std::vector<std::size_t> indices;
  std::size_t blocks = 0;
};

/// Geometric block length with the given mean, support {1, 2, ...}.
std::size_t geometric_block_length(double expected_block_len, std::mt19937_64& rng);

/// Stationary bootstrap index set: uniform block starts, geometric lengths with the given
/// mean, circular wrap.
BlockResample stationary_block_indices(std::size_t n, double expected_block_len,
                                       std::mt19937_64& rng);

std::vector<double> stationary_block_bootstrap(std::span<const double> series,
                                               double expected_block_len, std::uint64_t seed);

struct McsOptions {
  double block_len = 10.0;
  std::size_t resamples = 5000;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct McsResult {
  std::vector<std::string> models;
  std::vector<double> p_values;             // MCS p-value per model, same order as `models`
  std::vector<std::size_t> elimination;     // model indices, first eliminated first
  std::vector<double> elimination_stats;    // T_max at each elimination step

  /// Models with MCS p-value >= 1 - level, in input order.
  std::vector<std::string> survivors(double level) const;
};

/// T_max elimination with studentized differentials against the pool average. Bootstrap
/// index sets are drawn once and shared by every model and elimination step.
/// `losses[m]` is model m's loss series.
McsResult mcs(const std::vector<std::vector<double>>& losses,
              const std::vector<std::string>& models, const McsOptions& opts = {});
McsResult mcs(const LossPanel& panel, const McsOptions& opts = {});

}  // namespace tracejudge::stats
