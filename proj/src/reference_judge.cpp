#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "numfmt.hpp"
#include "tracejudge/judge.hpp"

namespace tracejudge {

namespace {

// Rule thresholds. They are calibrated so that each single-dimension corruption moves its own
// dimension on the fixture corpus; they carry no meaning beyond that.
constexpr double kRdSlack = 1.05;             // e above 1.05 tau with label 0 counts as a miss
constexpr double kHighVix = 25.0;
constexpr double kLowVix = 15.0;
constexpr double kRoutingTolerance = 0.3;     // |alpha - regime target|
constexpr double kAbruptBlend = 0.35;         // day-over-day alpha jump
constexpr double kLargeVixMove = 2.0;         // day-over-day VIX points that call for a response
constexpr double kShockVixMove = 5.0;
constexpr double kMinLean = 0.005;            // delta_tau counter to the VIX move
constexpr double kOscillation = 0.05;         // |delta_tau| on both sides of a sign flip
constexpr double kContradictoryShift = 0.03;  // delta_alpha toward the event pathway
constexpr double kRiskyAlpha = 0.6;
constexpr double kTimidAlpha = 0.3;
constexpr double kContradictoryAlpha = 0.8;
constexpr double kRoutingBreak = 0.1;         // alpha departure from the commanded blend
constexpr int kFrozenPenalty = 3;
constexpr int kDelayedRecoveryPenalty = 3;

struct Scored {
  int score = 5;
  std::vector<std::string> notes;
  std::optional<FailureLabel> label;
};

int floor1(int s) { return std::max(1, s); }

std::string day_list(const std::vector<std::int64_t>& days) {
  std::string out;
  for (std::size_t i = 0; i < days.size(); ++i) out += (i ? ", " : "") + std::to_string(days[i]);
  return out;
}

bool evidence_anomalous(const BehavioralTrace& t) {
  return t.detector.reconstruction_error > t.detector.threshold;
}

bool labeled_anomalous(const BehavioralTrace& t) { return t.detector.regime == Regime::Anomalous; }

double regime_target(bool anomalous) { return anomalous ? 0.2 : 0.8; }

bool routing_miss(const BehavioralTrace& t) {
  return std::abs(t.routing.alpha - regime_target(evidence_anomalous(t))) > kRoutingTolerance;
}

bool idle(const BehavioralTrace& t) { return t.action.delta_tau == 0.0 && t.action.delta_alpha == 0.0; }

bool all_idle(const std::vector<BehavioralTrace>& days) {
  return std::all_of(days.begin(), days.end(), idle);
}

double max_vix_move(const std::vector<BehavioralTrace>& days) {
  double m = 0.0;
  for (std::size_t i = 1; i < days.size(); ++i) {
    m = std::max(m, std::abs(days[i].market.vix - days[i - 1].market.vix));
  }
  return m;
}

// Anomalous label with a near-normal blend that the previous day's command did not produce.
bool label_contradiction(const std::vector<BehavioralTrace>& days, std::size_t i) {
  if (i == 0) return false;
  const auto& t = days[i];
  if (!labeled_anomalous(t) || !evidence_anomalous(t) || t.routing.alpha < kContradictoryAlpha) {
    return false;
  }
  const auto& p = days[i - 1];
  const double commanded = std::clamp(p.routing.alpha + p.action.delta_alpha, 0.0, 1.0);
  return std::abs(t.routing.alpha - commanded) > kRoutingBreak;
}

bool action_contradiction(const BehavioralTrace& t) {
  return t.action.delta_tau > 0.0 && t.action.delta_alpha < -kContradictoryShift;
}

Scored score_rd(const std::vector<BehavioralTrace>& days) {
  Scored s;
  std::vector<std::int64_t> misses;
  int high_vix_days = 0;
  bool any_label = false;
  for (const auto& t : days) {
    const double e = t.detector.reconstruction_error;
    const double tau = t.detector.threshold;
    const bool lab = labeled_anomalous(t);
    if ((lab && e < tau) || (!lab && e > kRdSlack * tau)) misses.push_back(t.day_index);
    if (t.market.vix >= kHighVix) ++high_vix_days;
    any_label = any_label || lab;
  }
  s.score -= static_cast<int>(misses.size());
  if (!misses.empty()) {
    s.notes.push_back(fmt::format("regime_label contradicts reconstruction_error vs threshold on day(s) {}",
                                  day_list(misses)));
  }
  const bool late = high_vix_days >= 3 && !any_label;
  if (late) {
    s.score -= 1;
    s.notes.push_back(fmt::format("VIX >= 25 on {} days with regime_label 0 throughout", high_vix_days));
  }
  s.score = floor1(s.score);
  if (misses.size() >= 3) {
    s.label = FailureLabel::SystematicMisclassification;
  } else if (!misses.empty() || late) {
    s.label = FailureLabel::DelayedThreshold;
  }
  return s;
}

// Days showing an SC contradiction pattern; other dimensions do not score them again.
std::vector<bool> contradiction_days(const std::vector<BehavioralTrace>& days) {
  std::vector<bool> out(days.size(), false);
  for (std::size_t i = 0; i < days.size(); ++i) {
    out[i] = label_contradiction(days, i) || action_contradiction(days[i]);
  }
  return out;
}

Scored score_rt(const std::vector<BehavioralTrace>& days, const std::vector<bool>& contradicted,
                std::vector<bool>& routing_missed) {
  Scored s;
  std::vector<std::int64_t> misses;
  routing_missed.assign(days.size(), false);
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (!contradicted[i] && routing_miss(days[i])) {
      routing_missed[i] = true;
      misses.push_back(days[i].day_index);
    }
  }
  s.score -= static_cast<int>(misses.size());
  if (!misses.empty()) {
    s.notes.push_back(fmt::format("alpha more than 0.3 from the blend implied by e vs tau on day(s) {}",
                                  day_list(misses)));
  }
  std::optional<std::int64_t> jump;
  for (std::size_t i = 1; i < days.size() && !jump; ++i) {
    const bool same_label = days[i].detector.regime == days[i - 1].detector.regime;
    if (same_label && std::abs(days[i].routing.alpha - days[i - 1].routing.alpha) > kAbruptBlend) {
      jump = days[i].day_index;
    }
  }
  if (jump) {
    s.score -= 1;
    s.notes.push_back(fmt::format("alpha jumps by more than 0.35 on day {} without a regime_label change", *jump));
  }
  s.score = floor1(s.score);
  if (!misses.empty()) {
    s.label = FailureLabel::WrongRouting;
  } else if (jump) {
    s.label = FailureLabel::AbruptBlending;
  }
  return s;
}

Scored score_ad(const std::vector<BehavioralTrace>& days, bool frozen) {
  Scored s;
  if (frozen) {
    s.score -= kFrozenPenalty;
    const double move = max_vix_move(days);
    s.notes.push_back("delta_tau and delta_alpha are exactly 0 on every day");
    if (move > kShockVixMove) {
      s.score -= 1;
      s.notes.push_back(fmt::format("no response although VIX moved {} points in one day", detail::fixed(move, 2)));
    }
    s.label = FailureLabel::FrozenParameters;
  }
  std::vector<std::int64_t> flips;
  for (std::size_t i = 1; i < days.size(); ++i) {
    const double a = days[i - 1].action.delta_tau;
    const double b = days[i].action.delta_tau;
    if (a * b < 0.0 && std::abs(a) > kOscillation && std::abs(b) > kOscillation) {
      flips.push_back(days[i].day_index);
    }
  }
  s.score -= static_cast<int>(flips.size());
  if (!flips.empty()) {
    s.notes.push_back(fmt::format("delta_tau reverses sign with magnitude above 0.05 on day(s) {}", day_list(flips)));
    if (!s.label) s.label = FailureLabel::OscillatingActions;
  }
  s.score = floor1(s.score);
  return s;
}

Scored score_rc(const std::vector<BehavioralTrace>& days, const std::vector<bool>& contradicted,
                const std::vector<bool>& routing_missed) {
  Scored s;
  int moves = 0;
  std::vector<std::int64_t> unscaled;
  for (std::size_t i = 1; i < days.size(); ++i) {
    const auto& t = days[i];
    const double move = t.market.vix - days[i - 1].market.vix;
    if (std::abs(move) <= kLargeVixMove || idle(t) || contradicted[i]) continue;
    ++moves;
    const double lean = t.action.delta_tau * (move > 0.0 ? 1.0 : -1.0);
    if (lean > -kMinLean || std::abs(t.action.delta_tau) > kOscillation) unscaled.push_back(t.day_index);
  }
  if (!unscaled.empty()) {
    const int deduction = static_cast<int>(std::lround(4.0 * static_cast<double>(unscaled.size()) / moves));
    s.score -= deduction;
    s.notes.push_back(fmt::format(
        "delta_tau not scaled against the VIX move on {} of {} large-move day(s): {}", unscaled.size(),
        moves, day_list(unscaled)));
  }
  std::vector<std::int64_t> risky;
  std::vector<std::int64_t> timid;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (routing_missed[i] || contradicted[i]) continue;  // already scored elsewhere
    const auto& t = days[i];
    if (t.market.vix >= kHighVix && t.routing.alpha > kRiskyAlpha) risky.push_back(t.day_index);
    if (t.market.vix < kLowVix && t.routing.alpha < kTimidAlpha) timid.push_back(t.day_index);
  }
  s.score -= static_cast<int>(risky.size() + timid.size());
  if (!risky.empty()) s.notes.push_back(fmt::format("alpha above 0.6 with VIX >= 25 on day(s) {}", day_list(risky)));
  if (!timid.empty()) s.notes.push_back(fmt::format("alpha below 0.3 with VIX < 15 on day(s) {}", day_list(timid)));
  s.score = floor1(s.score);
  if (!unscaled.empty() || !risky.empty() || !timid.empty()) s.label = FailureLabel::UncalibratedRisk;
  return s;
}

Scored score_sc(const std::vector<BehavioralTrace>& days) {
  Scored s;
  std::vector<std::int64_t> label_days;
  std::vector<std::int64_t> action_days;
  for (std::size_t i = 0; i < days.size(); ++i) {
    if (label_contradiction(days, i)) {
      label_days.push_back(days[i].day_index);
    } else if (action_contradiction(days[i])) {
      action_days.push_back(days[i].day_index);
    }
  }
  s.score = floor1(s.score - static_cast<int>(label_days.size() + action_days.size()));
  if (!label_days.empty()) {
    s.notes.push_back(fmt::format("anomalous regime_label routed with alpha >= 0.8 against the previous command on day(s) {}",
                                  day_list(label_days)));
  }
  if (!action_days.empty()) {
    s.notes.push_back(fmt::format("delta_tau > 0 together with delta_alpha < -0.03 on day(s) {}", day_list(action_days)));
  }
  if (!label_days.empty() || !action_days.empty()) s.label = FailureLabel::ContradictoryDecisions;
  return s;
}

Scored score_er(const std::vector<BehavioralTrace>& days, bool frozen) {
  Scored s;
  std::vector<std::size_t> error_days;
  for (std::size_t i = 0; i < days.size(); ++i) {
    const auto& es = days[i].performance.error_stats;
    if (es && error_indicator(*es)) error_days.push_back(i);
  }
  if (error_days.empty()) {
    s.score = 3;
    s.notes.push_back("no day with daily MAPE above its trailing mean plus one sd; insufficient evidence");
    return s;
  }
  std::optional<std::int64_t> unanswered;
  if (!frozen) {  // a fully frozen controller is scored under adaptation
    for (std::size_t i : error_days) {
      const std::size_t end = std::min(i + 2, days.size() - 1);
      if (i + 1 > end) continue;
      bool responded = false;
      for (std::size_t k = i + 1; k <= end; ++k) responded = responded || !idle(days[k]);
      if (!responded) {
        unanswered = days[i].day_index;
        break;
      }
    }
  }
  if (unanswered) {
    s.score -= kDelayedRecoveryPenalty;
    s.notes.push_back(fmt::format("no nonzero action within two days of the error spike on day {}", *unanswered));
  }
  const auto& first = *days[error_days.front()].performance.error_stats;
  const auto& last = days.back().performance.error_stats;
  const bool amplified = last && last->daily_mape > first.daily_mape;
  if (amplified) {
    s.score -= 1;
    s.notes.push_back(fmt::format("final-day MAPE {}% exceeds the first spike's {}%",
                                  detail::fixed(last->daily_mape, 2), detail::fixed(first.daily_mape, 2)));
  }
  s.score = floor1(s.score);
  if (unanswered) {
    s.label = FailureLabel::DelayedRecovery;
  } else if (amplified) {
    s.label = FailureLabel::ErrorAmplification;
  }
  return s;
}

std::string justify(const Scored& s) {
  if (s.notes.empty()) return "No rule triggered; behavior consistent with the rubric.";
  std::string out;
  for (std::size_t i = 0; i < s.notes.size(); ++i) out += (i ? "; " : "") + s.notes[i];
  return out + ".";
}

}  // namespace

Judgment reference_judge(const Episode& episode, std::string judge_id) {
  const auto& days = episode.traces;
  const bool frozen = !days.empty() && all_idle(days);
  const auto contradicted = contradiction_days(days);
  std::vector<bool> routing_missed;
  DimMap<Scored> r;
  r[Dimension::RD] = score_rd(days);
  r[Dimension::RT] = score_rt(days, contradicted, routing_missed);
  r[Dimension::AD] = score_ad(days, frozen);
  r[Dimension::RC] = score_rc(days, contradicted, routing_missed);
  r[Dimension::SC] = score_sc(days);
  r[Dimension::ER] = score_er(days, frozen);

  Judgment j;
  j.judge_id = std::move(judge_id);
  j.episode_id = episode.id;
  for (Dimension d : kDimensions) {
    j.scores[d] = r[d].score;
    j.justifications[d] = justify(r[d]);
    if (r[d].score < kLabelThreshold && r[d].label) j.failures.push_back({d, *r[d].label});
  }
  return j;
}

}  // namespace tracejudge
