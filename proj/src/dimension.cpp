#include "tracejudge/dimension.hpp"

#include <stdexcept>

namespace tracejudge {

namespace {

constexpr std::array<std::string_view, 6> kShortNames{"RD", "RT", "AD", "RC", "SC", "ER"};
constexpr std::array<std::string_view, 6> kLongNames{
    "Regime Detection",  "Routing",           "Adaptation",
    "Risk Calibration",  "Strategy Coherence", "Error Recovery"};

constexpr std::array<RubricAnchor, 6> kRubric{{
    {Dimension::RD,
     "Systematic misclassification of regime; threshold unresponsive to volatility changes",
     "All regime transitions identified within one trading day; threshold adjustments "
     "proportional to volatility"},
    {Dimension::RT,
     "Data routed to wrong pathway; blending weight contradicts regime classification",
     "Routing consistently matches market state; smooth blending transitions near threshold"},
    {Dimension::AD,
     "Parameters frozen or wildly oscillating; no response to condition changes within episode",
     "Prompt, proportional adjustments within one to two days; no overshooting or oscillation"},
    {Dimension::RC,
     "Risk posture inappropriate for volatility (e.g., aggressive in high-VIX period)",
     "Conservative during high volatility, confident during low volatility; smooth transitions"},
    {Dimension::SC, "Multiple contradictory actions across decision chain within episode",
     "All decisions form logically consistent sequence; no contradictions"},
    {Dimension::ER, "No corrective action within 2 days of error; errors persist or worsen",
     "Corrective adjustments within 1 to 2 days; subsequent predictions show measurable "
     "improvement"},
}};

}  // namespace

std::string_view to_string(Dimension d) { return kShortNames[static_cast<std::size_t>(d)]; }

std::string_view long_name(Dimension d) { return kLongNames[static_cast<std::size_t>(d)]; }

std::optional<Dimension> parse_dimension(std::string_view text) {
  for (Dimension d : kDimensions) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

std::string_view to_string(Subspace s) {
  switch (s) {
    case Subspace::TauOnly:
      return "tau";
    case Subspace::AlphaOnly:
      return "alpha";
    case Subspace::Both:
      return "both";
  }
  return "?";
}

const FailureLabelInfo& info(FailureLabel label) {
  return kFailureLabels[static_cast<std::size_t>(label)];
}

std::string_view to_string(FailureLabel label) { return info(label).name; }

std::optional<FailureLabel> parse_failure_label(std::string_view text) {
  for (const auto& entry : kFailureLabels) {
    if (entry.name == text) return entry.label;
  }
  return std::nullopt;
}

const RubricAnchor& rubric_anchor(Dimension d) { return kRubric[static_cast<std::size_t>(d)]; }

}  // namespace tracejudge
