#include "tracejudge/reward.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tracejudge/error.hpp"
#include "tracejudge/stats/basic.hpp"

namespace tracejudge {

RewardConfig::RewardConfig(double lambda, double theta, DimMap<double> weights, bool normalize)
    : lambda_(lambda), theta_(theta), weights_(weights) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(theta >= 1.0 && theta <= 5.0)) throw ConfigError("theta must lie in [1, 5]");
  double sum = 0.0;
  for (Dimension d : kDimensions) {
    if (!(weights_[d] >= 0.0) || !std::isfinite(weights_[d])) {
      throw ConfigError(fmt::format("weight for {} must be non-negative", to_string(d)));
    }
    sum += weights_[d];
  }
  if (normalize) {
    if (sum <= 0.0) throw ConfigError("cannot normalize all-zero weights");
    for (Dimension d : kDimensions) weights_[d] *= 6.0 / sum;
  }
}

RewardConfig reward_config_from_json(const nlohmann::json& j) {
  try {
    DimMap<double> w = kSharpeWeights;
    if (j.contains("weights")) {
      for (const auto& [k, v] : j.at("weights").items()) {
        auto d = parse_dimension(k);
        if (!d) throw ConfigError(fmt::format("reward weights: unknown dimension '{}'", k));
        w[*d] = v.get<double>();
      }
    }
    return RewardConfig(j.value("lambda", 0.15), j.value("theta", 3.0), w,
                        j.value("normalize_weights", false));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("reward config: {}", e.what()));
  }
}

nlohmann::ordered_json to_json(const RewardConfig& cfg) {
  nlohmann::ordered_json j;
  j["lambda"] = cfg.lambda();
  j["theta"] = cfg.theta();
  auto& w = j["weights"] = nlohmann::ordered_json::object();
  for (Dimension d : kDimensions) w[std::string(to_string(d))] = cfg.weights()[d];
  return j;
}

CreditVector credit_vector(Subspace s) {
  switch (s) {
    case Subspace::TauOnly:
      return {1.0, 0.0};
    case Subspace::AlphaOnly:
      return {0.0, 1.0};
    case Subspace::Both:
      return {0.5, 0.5};
  }
  return {0.5, 0.5};
}

CreditMap default_credit_map() {
  CreditMap m;
  m[Dimension::RD] = {1.0, 0.0};
  m[Dimension::RT] = {0.0, 1.0};
  m[Dimension::AD] = {0.5, 0.5};
  m[Dimension::RC] = {1.0, 0.0};
  m[Dimension::SC] = {0.5, 0.5};
  m[Dimension::ER] = {0.5, 0.5};
  return m;
}

CreditMap uniform_credit_map() {
  CreditMap m;
  for (Dimension d : kDimensions) m[d] = {0.5, 0.5};
  return m;
}

PenaltyBreakdown hinge_penalty(const DimMap<double>& s, const RewardConfig& cfg) {
  PenaltyBreakdown b;
  for (Dimension d : kDimensions) {
    b.per_dimension[d] = cfg.lambda() * std::max(0.0, cfg.theta() - s[d]) * cfg.weights()[d];
    b.total += b.per_dimension[d];
  }
  return b;
}

PenaltyBreakdown hinge_penalty(const ConsensusScores& scores, const RewardConfig& cfg) {
  return hinge_penalty(scores.mean_scores, cfg);
}

PenaltyBreakdown credit_assign(PenaltyBreakdown b, const CreditMap& credit,
                               std::span<const FailureLabel> overrides) {
  CreditMap effective = credit;
  std::array<bool, 6> overridden{};
  for (FailureLabel label : overrides) {
    const auto& meta = info(label);
    if (b.per_dimension[meta.dimension] == 0.0) {
      b.warnings.push_back(fmt::format("label {} ignored: {} carries no penalty", meta.name,
                                       to_string(meta.dimension)));
      spdlog::debug("{}", b.warnings.back());
      continue;
    }
    const auto v = credit_vector(meta.subspace);
    auto& done = overridden[static_cast<std::size_t>(meta.dimension)];
    if (done && !(effective[meta.dimension] == v)) {
      b.warnings.push_back(fmt::format("conflicting labels for {}; keeping the first",
                                       to_string(meta.dimension)));
      continue;
    }
    effective[meta.dimension] = v;
    done = true;
  }
  double tau = 0.0;
  double alpha = 0.0;
  for (Dimension d : kDimensions) {
    tau += b.per_dimension[d] * effective[d].tau;
    alpha += b.per_dimension[d] * effective[d].alpha;
  }
  // Derive the smaller component from the larger so the sum reproduces total exactly;
  // total - larger is exact because larger lies in [total/2, total].
  if (tau >= alpha) {
    b.tau = std::min(tau, b.total);
    b.alpha = b.total - b.tau;
  } else {
    b.alpha = std::min(alpha, b.total);
    b.tau = b.total - b.alpha;
  }
  return b;
}

double modified_reward(double base, const PenaltyBreakdown& b) { return base - b.total; }

DimensionWeights dimension_weights(std::span<const ConsensusScores> scores,
                                   std::span<const double> sharpe) {
  if (scores.size() != sharpe.size()) throw DataError("dimension_weights: inputs differ in length");
  if (scores.size() < 10) {
    throw DataError(fmt::format("dimension_weights needs at least 10 pairs, got {}", scores.size()));
  }
  DimensionWeights out;
  for (Dimension d : kDimensions) {
    std::vector<double> x;
    x.reserve(scores.size());
    for (const auto& c : scores) x.push_back(c.mean_scores[d]);
    const auto rho = stats::spearman(x, sharpe);
    if (!rho) {
      out.warnings.push_back(fmt::format("{}: correlation undefined (constant input); weight 0",
                                         to_string(d)));
      out.weights[d] = 0.0;
    } else if (*rho < 0.0) {
      out.warnings.push_back(fmt::format("{}: negative correlation {:.4f} clamped to 0", to_string(d), *rho));
      out.weights[d] = 0.0;
    } else {
      out.weights[d] = *rho;
    }
  }
  for (const auto& w : out.warnings) spdlog::warn("{}", w);
  return out;
}

}  // namespace tracejudge
