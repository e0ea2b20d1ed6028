#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace tracejudge {

/// The six behavioral evaluation dimensions.
enum class Dimension : std::uint8_t { RD = 0, RT, AD, RC, SC, ER };

inline constexpr std::array<Dimension, 6> kDimensions{Dimension::RD, Dimension::RT,
                                                      Dimension::AD, Dimension::RC,
                                                      Dimension::SC, Dimension::ER};

std::string_view to_string(Dimension d);
std::string_view long_name(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view text);

/// Fixed-size map keyed by Dimension.
template <class T>
struct DimMap {
  std::array<T, 6> values{};

  constexpr T& operator[](Dimension d) { return values[static_cast<std::size_t>(d)]; }
  constexpr const T& operator[](Dimension d) const {
    return values[static_cast<std::size_t>(d)];
  }

  friend bool operator==(const DimMap&, const DimMap&) = default;
};

/// Action subspace a penalty is routed to.
enum class Subspace : std::uint8_t { TauOnly, AlphaOnly, Both };

std::string_view to_string(Subspace s);

/// Twelve-label failure vocabulary; each label belongs to one dimension.
enum class FailureLabel : std::uint8_t {
  DelayedThreshold,
  SystematicMisclassification,
  OversensitiveThreshold,
  WrongRouting,
  InconsistentBlend,
  AbruptBlending,
  FrozenParameters,
  OscillatingActions,
  UncalibratedRisk,
  ContradictoryDecisions,
  DelayedRecovery,
  ErrorAmplification,
};

struct FailureLabelInfo {
  FailureLabel label;
  std::string_view name;
  Dimension dimension;
  Subspace subspace;
};

inline constexpr std::array<FailureLabelInfo, 12> kFailureLabels{{
    {FailureLabel::DelayedThreshold, "delayed_threshold", Dimension::RD, Subspace::TauOnly},
    {FailureLabel::SystematicMisclassification, "systematic_misclassification", Dimension::RD,
     Subspace::TauOnly},
    {FailureLabel::OversensitiveThreshold, "oversensitive_threshold", Dimension::RD,
     Subspace::TauOnly},
    {FailureLabel::WrongRouting, "wrong_routing", Dimension::RT, Subspace::AlphaOnly},
    {FailureLabel::InconsistentBlend, "inconsistent_blend", Dimension::RT, Subspace::AlphaOnly},
    {FailureLabel::AbruptBlending, "abrupt_blending", Dimension::RT, Subspace::AlphaOnly},
    {FailureLabel::FrozenParameters, "frozen_parameters", Dimension::AD, Subspace::Both},
    {FailureLabel::OscillatingActions, "oscillating_actions", Dimension::AD, Subspace::Both},
    {FailureLabel::UncalibratedRisk, "uncalibrated_risk", Dimension::RC, Subspace::TauOnly},
    {FailureLabel::ContradictoryDecisions, "contradictory_decisions", Dimension::SC,
     Subspace::Both},
    {FailureLabel::DelayedRecovery, "delayed_recovery", Dimension::ER, Subspace::Both},
    {FailureLabel::ErrorAmplification, "error_amplification", Dimension::ER, Subspace::Both},
}};

const FailureLabelInfo& info(FailureLabel label);
std::string_view to_string(FailureLabel label);
std::optional<FailureLabel> parse_failure_label(std::string_view text);

/// Score-1 and score-5 anchor text for one dimension.
struct RubricAnchor {
  Dimension dimension;
  std::string_view score1_text;
  std::string_view score5_text;
};

const RubricAnchor& rubric_anchor(Dimension d);

}  // namespace tracejudge
