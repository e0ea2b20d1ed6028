#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/agreement.hpp"
#include "tracejudge/dimension.hpp"

namespace tracejudge {

/// Predictive-validity weights from the realized-Sharpe correlation study.
inline constexpr DimMap<double> kSharpeWeights{{0.64, 0.59, 0.58, 0.55, 0.62, 0.51}};

/// Immutable after construction.
class RewardConfig {
 public:
  /// Throws ConfigError unless lambda >= 0, 1 <= theta <= 5 and all weights >= 0.
  /// With `normalize`, weights are rescaled to mean 1.
  RewardConfig(double lambda = 0.15, double theta = 3.0, DimMap<double> weights = kSharpeWeights,
               bool normalize = false);

  double lambda() const { return lambda_; }
  double theta() const { return theta_; }
  const DimMap<double>& weights() const { return weights_; }

  RewardConfig with_lambda(double lambda) const { return RewardConfig(lambda, theta_, weights_); }

 private:
  double lambda_;
  double theta_;
  DimMap<double> weights_;
};

RewardConfig reward_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RewardConfig& cfg);

struct CreditVector {
  double tau = 0.0;
  double alpha = 0.0;

  friend bool operator==(const CreditVector&, const CreditVector&) = default;
};

using CreditMap = DimMap<CreditVector>;

/// RD, RC to delta_tau; RT to delta_alpha; AD, SC, ER split evenly.
CreditMap default_credit_map();
/// (0.5, 0.5) for every dimension.
CreditMap uniform_credit_map();
CreditVector credit_vector(Subspace s);

struct PenaltyBreakdown {
  double total = 0.0;
  DimMap<double> per_dimension{};
  double tau = 0.0;
  double alpha = 0.0;
  std::vector<std::string> warnings;
};

/// lambda * max(0, theta - s_d) * w_d per dimension; components left at zero.
PenaltyBreakdown hinge_penalty(const DimMap<double>& mean_scores, const RewardConfig& cfg);
PenaltyBreakdown hinge_penalty(const ConsensusScores& scores, const RewardConfig& cfg);

/// Routes each dimension's penalty through its credit vector. A failure label replaces the
/// dimension's vector with its own subspace. tau + alpha == total holds exactly.
PenaltyBreakdown credit_assign(PenaltyBreakdown breakdown, const CreditMap& credit,
                               std::span<const FailureLabel> overrides = {});

double modified_reward(double base, const PenaltyBreakdown& breakdown);

struct DimensionWeights {
  DimMap<double> weights{};
  std::vector<std::string> warnings;
  bool frozen = true;
};

/// Spearman correlation of each dimension's consensus score with the realized Sharpe ratio;
/// negative or undefined correlations become 0 with a warning. Needs >= 10 pairs.
DimensionWeights dimension_weights(std::span<const ConsensusScores> episode_scores,
                                   std::span<const double> forward_sharpe);

}  // namespace tracejudge
