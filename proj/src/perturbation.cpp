#include "tracejudge/perturbation.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "numfmt.hpp"
#include "tracejudge/agreement.hpp"
#include "tracejudge/error.hpp"
#include "tracejudge/parallel.hpp"
#include "tracejudge/stats/basic.hpp"

namespace tracejudge {

namespace {
constexpr std::array<std::string_view, 6> kKindNames{
    "regime_inversion", "wrong_routing", "frozen_sac", "no_vol_scaling", "contradictory_actions",
    "disabled_recovery"};
}

std::string_view to_string(PerturbationKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<PerturbationKind> parse_perturbation_kind(std::string_view s) {
  for (auto k : kPerturbationKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

Dimension target_dimension(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::RegimeInversion:
      return Dimension::RD;
    case PerturbationKind::WrongRouting:
      return Dimension::RT;
    case PerturbationKind::FrozenSac:
      return Dimension::AD;
    case PerturbationKind::NoVolScaling:
      return Dimension::RC;
    case PerturbationKind::ContradictoryActions:
      return Dimension::SC;
    case PerturbationKind::DisabledRecovery:
      return Dimension::ER;
  }
  return Dimension::RD;
}

Episode perturb(const Episode& episode, PerturbationKind kind, std::uint64_t seed) {
  Episode out = episode;
  out.id = fmt::format("{}/{}", episode.id, to_string(kind));
  auto& days = out.traces;
  switch (kind) {
    case PerturbationKind::RegimeInversion:
      for (auto& t : days) {
        t.detector.regime = t.detector.regime == Regime::Normal ? Regime::Anomalous : Regime::Normal;
      }
      break;
    case PerturbationKind::WrongRouting:
      for (auto& t : days) {
        t.routing = RoutingState::from_alpha(t.detector.regime == Regime::Anomalous ? 0.9 : 0.1);
      }
      break;
    case PerturbationKind::FrozenSac:
      for (auto& t : days) t.action = {0.0, 0.0};
      break;
    case PerturbationKind::NoVolScaling: {
      if (days.empty()) break;
      const double first_alpha = days.front().routing.alpha;
      for (std::size_t i = 0; i < days.size(); ++i) {
        days[i].routing = RoutingState::from_alpha(first_alpha);
        if (i > 0 &&
            std::abs(days[i].market.vix - days[i - 1].market.vix) > kVolScalingVixMove) {
          days[i].action.delta_tau = 0.0;
        }
      }
      break;
    }
    case PerturbationKind::ContradictoryActions: {
      std::mt19937_64 rng(seed);
      for (auto& t : days) {
        bool label_pattern = false;
        if (t.detector.regime == Regime::Anomalous) {
          label_pattern = std::bernoulli_distribution(0.5)(rng);
        }
        if (label_pattern) {
          t.routing = RoutingState::from_alpha(0.9);
        } else {
          t.action = {0.05, -0.05};
        }
      }
      break;
    }
    case PerturbationKind::DisabledRecovery: {
      std::vector<bool> zero(days.size(), false);
      for (std::size_t i = 0; i < days.size(); ++i) {
        const auto& es = days[i].performance.error_stats;
        if (es && error_indicator(*es)) {
          for (std::size_t k = i + 1; k <= i + 2 && k < days.size(); ++k) zero[k] = true;
        }
      }
      for (std::size_t i = 0; i < days.size(); ++i) {
        if (zero[i]) days[i].action = {0.0, 0.0};
      }
      break;
    }
  }
  return out;
}

std::vector<ValidationEpisode> build_validation_set(std::span<const Episode> baselines,
                                                    std::uint64_t seed) {
  if (baselines.size() != 60) {
    throw DataError(fmt::format("validation set needs 60 baselines, got {}", baselines.size()));
  }
  std::map<Stratum, std::size_t> per;
  for (const auto& b : baselines) ++per[b.stratum];
  for (Stratum s : {Stratum::LowVol, Stratum::MedVol, Stratum::HighVol}) {
    if (per[s] != 20) {
      throw DataError(fmt::format("validation set needs 20 {} baselines, got {}", to_string(s), per[s]));
    }
  }
  std::vector<ValidationEpisode> out;
  out.reserve(420);
  for (std::size_t i = 0; i < baselines.size(); ++i) {
    out.push_back({baselines[i], baselines[i].id, std::nullopt});
    for (std::size_t k = 0; k < kPerturbationKinds.size(); ++k) {
      const auto kind = kPerturbationKinds[k];
      out.push_back({perturb(baselines[i], kind, derive_seed(seed, i * 6 + k)), baselines[i].id, kind});
    }
  }
  return out;
}

std::string serialize_manifest_line(const ValidationEpisode& v) {
  return fmt::format("{{\"baseline_id\":{},\"kind\":{},\"episode\":{}}}",
                     nlohmann::json(v.baseline_id).dump(),
                     v.kind ? fmt::format("\"{}\"", to_string(*v.kind)) : std::string("null"),
                     serialize_episode(v.episode));
}

ValidationEpisode parse_manifest_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("manifest line is not a JSON object");
  ValidationEpisode v;
  try {
    v.baseline_id = j.at("baseline_id").get<std::string>();
    if (!j.at("kind").is_null()) {
      v.kind = parse_perturbation_kind(j.at("kind").get<std::string>());
      if (!v.kind) throw DataError("manifest: unknown perturbation kind");
    }
    v.episode = deserialize_episode(j.at("episode").dump());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("manifest: {}", e.what()));
  }
  return v;
}

SpecificityReport specificity_report(std::span<const ValidationEpisode> set,
                                     const EvaluationMap& evaluations) {
  if (evaluations.empty()) throw DataError("specificity report: no judges");
  SpecificityReport report;
  for (const auto& [judge, _] : evaluations) report.judges.push_back(judge);

  std::vector<std::string> gaps;
  std::map<std::string, ConsensusScores> cons;
  std::map<std::string, std::vector<Judgment>> per_episode;
  for (const auto& v : set) {
    std::vector<Judgment> js;
    for (const auto& [judge, by_episode] : evaluations) {
      auto it = by_episode.find(v.episode.id);
      if (it == by_episode.end()) {
        gaps.push_back(fmt::format("({}, {})", judge, v.episode.id));
      } else {
        js.push_back(it->second);
      }
    }
    if (js.size() == evaluations.size()) {
      cons.emplace(v.episode.id, consensus(js));
      per_episode.emplace(v.episode.id, std::move(js));
    }
  }
  if (!gaps.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(gaps.size(), 10); ++i) {
      list += (i ? ", " : "") + gaps[i];
    }
    throw DataError(fmt::format("specificity report: {} missing evaluations: {}{}", gaps.size(),
                                list, gaps.size() > 10 ? ", ..." : ""));
  }

  std::map<std::string, const ValidationEpisode*> originals;
  for (const auto& v : set) {
    if (!v.kind) originals[v.baseline_id] = &v;
  }
  for (auto kind : kPerturbationKinds) {
    SpecificityRow row;
    row.kind = kind;
    row.target = target_dimension(kind);
    std::vector<double> pert_target;
    std::vector<double> base_target;
    double off_sum = 0.0;
    std::vector<Judgment> perturbed_judgments;
    for (const auto& v : set) {
      if (v.kind != kind) continue;
      auto o = originals.find(v.baseline_id);
      if (o == originals.end()) {
        throw DataError(fmt::format("specificity report: no original for baseline {}", v.baseline_id));
      }
      const auto& pc = cons.at(v.episode.id);
      const auto& bc = cons.at(o->second->episode.id);
      pert_target.push_back(pc.mean_scores[row.target]);
      base_target.push_back(bc.mean_scores[row.target]);
      double off = 0.0;
      for (Dimension d : kDimensions) {
        if (d != row.target) off += pc.mean_scores[d] - bc.mean_scores[d];
      }
      off_sum += off / 5.0;
      for (const auto& j : per_episode.at(v.episode.id)) perturbed_judgments.push_back(j);
    }
    row.pairs = pert_target.size();
    if (row.pairs == 0) {
      row.test = stats::TestResult::make_degenerate("no perturbed episodes of this kind");
      report.rows.push_back(std::move(row));
      continue;
    }
    double drop = 0.0;
    for (std::size_t i = 0; i < row.pairs; ++i) drop += pert_target[i] - base_target[i];
    row.targeted_drop = drop / static_cast<double>(row.pairs);
    row.offtarget_shift = off_sum / static_cast<double>(row.pairs);
    if (row.pairs >= 2) {
      row.test = stats::paired_t(pert_target, base_target);
    } else {
      row.test = stats::TestResult::make_degenerate("fewer than two pairs");
    }
    if (report.judges.size() >= 2 && row.pairs >= 2) {
      row.alpha_k = krippendorff_alpha(rating_matrix(perturbed_judgments, row.target));
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::ordered_json to_json(const SpecificityReport& r) {
  nlohmann::ordered_json j;
  j["judges"] = r.judges;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json o;
    o["kind"] = std::string(to_string(row.kind));
    o["target"] = std::string(to_string(row.target));
    o["pairs"] = row.pairs;
    o["targeted_drop"] = row.targeted_drop;
    o["offtarget_shift"] = row.offtarget_shift;
    o["alpha_k"] = row.alpha_k ? stats::number_or_null(*row.alpha_k) : nlohmann::ordered_json(nullptr);
    o["paired_t"] = stats::to_json(row.test);
    rows.push_back(std::move(o));
  }
  return j;
}

std::string to_csv(const SpecificityReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? detail::fixed(v, 4) : std::string(); };
  std::string out = "kind,target,targeted_drop,offtarget_shift,alpha_k,p_value\n";
  for (const auto& row : r.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", to_string(row.kind), to_string(row.target),
                       num(row.targeted_drop), num(row.offtarget_shift),
                       row.alpha_k ? num(*row.alpha_k) : std::string(),
                       row.test.degenerate ? std::string() : detail::shortest(row.test.p_value));
  }
  return out;
}

}  // namespace tracejudge
