#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tracejudge/judge.hpp"
#include "tracejudge/stats/result.hpp"
#include "tracejudge/trace.hpp"

namespace tracejudge {

enum class PerturbationKind : std::uint8_t {
  RegimeInversion,
  WrongRouting,
  FrozenSac,
  NoVolScaling,
  ContradictoryActions,
  DisabledRecovery,
};

inline constexpr std::array<PerturbationKind, 6> kPerturbationKinds{
    PerturbationKind::RegimeInversion, PerturbationKind::WrongRouting,
    PerturbationKind::FrozenSac,       PerturbationKind::NoVolScaling,
    PerturbationKind::ContradictoryActions, PerturbationKind::DisabledRecovery};

std::string_view to_string(PerturbationKind k);
std::optional<PerturbationKind> parse_perturbation_kind(std::string_view s);
Dimension target_dimension(PerturbationKind k);

/// |VIX change| above which NoVolScaling treats a day's delta_tau as volatility-driven.
/// delta_tau is the component the simulated controller scales with same-day VIX moves.
inline constexpr double kVolScalingVixMove = 2.0;

/// Single-dimension corruption. The returned episode id is "<id>/<kind>".
Episode perturb(const Episode& episode, PerturbationKind kind, std::uint64_t seed);

struct ValidationEpisode {
  Episode episode;
  std::string baseline_id;
  std::optional<PerturbationKind> kind;  // nullopt for the unperturbed original
};

/// 60 originals (20 per stratum) plus one perturbed copy per kind: 420 episodes, each
/// baseline followed by its six perturbations.
std::vector<ValidationEpisode> build_validation_set(std::span<const Episode> baselines,
                                                    std::uint64_t seed);

std::string serialize_manifest_line(const ValidationEpisode& v);
ValidationEpisode parse_manifest_line(std::string_view line);

/// judge id -> episode id -> judgment
using EvaluationMap = std::map<std::string, std::map<std::string, Judgment>>;

struct SpecificityRow {
  PerturbationKind kind;
  Dimension target;
  double targeted_drop = 0.0;
  double offtarget_shift = 0.0;
  std::optional<double> alpha_k;
  stats::TestResult test;  // paired t of perturbed vs baseline target scores
  std::size_t pairs = 0;
};

struct SpecificityReport {
  std::vector<std::string> judges;
  std::vector<SpecificityRow> rows;  // one per kind, in kPerturbationKinds order
};

/// Drops use the per-episode judge consensus; alpha_k needs at least two judges.
SpecificityReport specificity_report(std::span<const ValidationEpisode> set,
                                     const EvaluationMap& evaluations);

nlohmann::ordered_json to_json(const SpecificityReport& r);
std::string to_csv(const SpecificityReport& r);

}  // namespace tracejudge
