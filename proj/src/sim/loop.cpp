#include "tracejudge/sim/loop.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tracejudge/error.hpp"
#include "tracejudge/parallel.hpp"

namespace tracejudge::sim {

namespace {

// Stream indices for derive_seed(scenario.seed, ...).
constexpr std::uint64_t kObservationMarket = 1;
constexpr std::uint64_t kEvaluationMarket = 2;
constexpr std::uint64_t kObservationAgent = 3;
constexpr std::uint64_t kEvaluationAgent = 4;
// Streams for derive_seed(corpus seed, ...).
constexpr std::uint64_t kCorpusMarket = 1;
constexpr std::uint64_t kCorpusAgent = 2;

std::string_view to_string(CreditMode m) { return m == CreditMode::Targeted ? "targeted" : "uniform"; }

nlohmann::ordered_json dim_json(const DimMap<double>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (Dimension d : kDimensions) j[std::string(tracejudge::to_string(d))] = m[d];
  return j;
}

struct Observed {
  std::vector<BehavioralTrace> traces;
  std::vector<Transition> transitions;  // one per trace except the last
  double abs_error_sum = 0.0;
  std::size_t hits = 0;
};

Observed observe_days(AgentState& agent, std::span<const MarketDay> days) {
  Observed o;
  std::optional<StepResult> prev;
  for (const auto& day : days) {
    auto step = agent_step(agent, day);
    if (prev) {
      const auto& pt = prev->trace;
      Transition tr;
      tr.state = prev->observation;
      tr.next = step.observation;
      tr.raw_tau = prev->raw_tau;
      tr.raw_alpha = prev->raw_alpha;
      tr.reward = base_reward(pt, day.price);
      o.transitions.push_back(tr);
      o.abs_error_sum += std::abs(pt.prediction - day.price) / day.price;
      const auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
      o.hits += sgn(pt.prediction - pt.market.price) == sgn(day.price - pt.market.price);
    }
    o.traces.push_back(step.trace);
    prev = std::move(step);
  }
  return o;
}

// All assets observed over one window. Episode ids carry the asset index.
struct Pooled {
  std::vector<Episode> episodes;
  std::vector<Transition> transitions;
  std::vector<std::size_t> episode_of;  // per transition, index into episodes or npos
  double abs_error_sum = 0.0;
  std::size_t hits = 0;
};

Pooled observe_assets(std::span<AgentState> agents, std::span<const std::vector<MarketDay>> windows,
                      std::size_t episode_length) {
  if (agents.size() != windows.size()) throw ConfigError("one market window per asset required");
  Pooled p;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    auto o = observe_days(agents[a], windows[a]);
    const std::size_t first = p.episodes.size();
    for (auto& e : group_episodes(o.traces, episode_length)) {
      e.id = fmt::format("a{:02}-{}", a, e.id);
      p.episodes.push_back(std::move(e));
    }
    const std::size_t count = p.episodes.size() - first;
    for (std::size_t t = 0; t < o.transitions.size(); ++t) {
      const std::size_t local = t / episode_length;
      p.episode_of.push_back(local < count ? first + local : std::string::npos);
      p.transitions.push_back(o.transitions[t]);
    }
    p.abs_error_sum += o.abs_error_sum;
    p.hits += o.hits;
  }
  return p;
}

double percent_of(double value, std::size_t n) { return n ? 100.0 * value / static_cast<double>(n) : 0.0; }

double actor_distance(const Policy& a, const Policy& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kActorFeatures; ++i) {
    s += std::pow(a.tau.theta[i] - b.tau.theta[i], 2) + std::pow(a.alpha.theta[i] - b.alpha.theta[i], 2);
  }
  s += std::pow(a.tau.log_std - b.tau.log_std, 2) + std::pow(a.alpha.log_std - b.alpha.log_std, 2);
  return std::sqrt(s);
}

}  // namespace

void CycleConfig::validate() const {
  if (days == 0 || episode_length == 0 || days % episode_length != 0) {
    throw ConfigError("cycle: days must be a positive multiple of episode_length");
  }
  if (cycles == 0) throw ConfigError("cycle: cycles must be positive");
  if (assets == 0) throw ConfigError("cycle: assets must be positive");
  if (warmup_days < kWarmupDays) {
    throw ConfigError(fmt::format("cycle: warmup_days must be at least {}", kWarmupDays));
  }
  if (evaluation_days == 0 || evaluation_days % episode_length != 0) {
    throw ConfigError("cycle: evaluation_days must be a positive multiple of episode_length");
  }
  finetune.validate();
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario s;
  try {
    s.seed = j.value("seed", s.seed);
    if (j.contains("market")) s.market = market_model_from_json(j.at("market"));
    if (j.contains("agent")) s.agent = agent_config_from_json(j.at("agent"));
    if (j.contains("policy")) s.policy = policy_from_json(j.at("policy"));
    if (j.contains("reward")) s.reward = reward_config_from_json(j.at("reward"));
    if (j.contains("cycle")) {
      const auto& c = j.at("cycle");
      s.cycle.days = c.value("days", s.cycle.days);
      s.cycle.episode_length = c.value("episode_length", s.cycle.episode_length);
      s.cycle.cycles = c.value("cycles", s.cycle.cycles);
      s.cycle.assets = c.value("assets", s.cycle.assets);
      s.cycle.warmup_days = c.value("warmup_days", s.cycle.warmup_days);
      s.cycle.evaluation_days = c.value("evaluation_days", s.cycle.evaluation_days);
      s.cycle.penalty_enabled = c.value("penalty_enabled", s.cycle.penalty_enabled);
      const auto credit = c.value("credit", std::string("targeted"));
      if (credit == "targeted") {
        s.cycle.credit = CreditMode::Targeted;
      } else if (credit == "uniform") {
        s.cycle.credit = CreditMode::Uniform;
      } else {
        throw ConfigError(fmt::format("cycle: unknown credit mode '{}'", credit));
      }
      if (c.contains("finetune")) {
        const auto& f = c.at("finetune");
        auto& ft = s.cycle.finetune;
        ft.epochs = f.value("epochs", ft.epochs);
        ft.learning_rate = f.value("learning_rate", ft.learning_rate);
        ft.ridge = f.value("ridge", ft.ridge);
        ft.soft_update = f.value("soft_update", ft.soft_update);
        ft.discount = f.value("discount", ft.discount);
        ft.entropy_coef = f.value("entropy_coef", ft.entropy_coef);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("scenario: {}", e.what()));
  }
  s.cycle.validate();
  return s;
}

nlohmann::ordered_json to_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["market"] = to_json(s.market);
  j["agent"] = to_json(s.agent);
  j["policy"] = to_json(s.policy);
  j["reward"] = to_json(s.reward);
  auto& c = j["cycle"];
  c["days"] = s.cycle.days;
  c["episode_length"] = s.cycle.episode_length;
  c["cycles"] = s.cycle.cycles;
  c["assets"] = s.cycle.assets;
  c["warmup_days"] = s.cycle.warmup_days;
  c["evaluation_days"] = s.cycle.evaluation_days;
  c["penalty_enabled"] = s.cycle.penalty_enabled;
  c["credit"] = std::string(to_string(s.cycle.credit));
  auto& f = c["finetune"];
  f["epochs"] = s.cycle.finetune.epochs;
  f["learning_rate"] = s.cycle.finetune.learning_rate;
  f["ridge"] = s.cycle.finetune.ridge;
  f["soft_update"] = s.cycle.finetune.soft_update;
  f["discount"] = s.cycle.finetune.discount;
  f["entropy_coef"] = s.cycle.finetune.entropy_coef;
  return j;
}

Scenario deficiency_scenario(std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  s.policy = miscalibrated_policy();
  return s;
}

JudgedEpisodes judge_episodes(std::vector<Episode> episodes, std::span<Judge* const> judges,
                              Archive* archive) {
  if (judges.empty()) throw ConfigError("no judges configured");
  JudgedEpisodes out;
  out.episodes = std::move(episodes);
  out.judgments.resize(out.episodes.size());
  out.consensus.reserve(out.episodes.size());
  DimMap<double> sums{};
  for (std::size_t i = 0; i < out.episodes.size(); ++i) {
    const auto& ep = out.episodes[i];
    for (Judge* judge : judges) {
      try {
        out.judgments[i].push_back(judge->evaluate(ep));
      } catch (const JudgeError& e) {
        if (archive) archive->append_error(ep.id, judge->id(), e.what(), e.raw());
        throw;
      }
    }
    out.consensus.push_back(consensus(out.judgments[i]));
    if (archive) archive->append(ep.id, out.judgments[i], out.consensus.back());
    for (Dimension d : kDimensions) sums[d] += out.consensus.back().mean_scores[d];
  }
  for (Dimension d : kDimensions) {
    out.mean_scores[d] = out.episodes.empty() ? 0.0 : sums[d] / static_cast<double>(out.episodes.size());
  }
  return out;
}

nlohmann::ordered_json to_json(const Evaluation& e) {
  nlohmann::ordered_json j;
  j["mean_scores"] = dim_json(e.mean_scores);
  j["mape"] = e.mape;
  j["da"] = e.da;
  j["episodes"] = e.episodes;
  return j;
}

namespace {
struct Desks {
  std::vector<AgentState> agents;
  std::vector<std::vector<MarketDay>> days;  // after warm-up
};

// Independent market path and controller per asset, warmed up on the first warmup_days.
Desks make_desks(const Scenario& s, const Policy& policy, std::uint64_t market_stream,
                 std::uint64_t agent_stream, std::size_t days) {
  Desks d;
  for (std::size_t a = 0; a < s.cycle.assets; ++a) {
    MarketModel m = s.market;
    m.seed = derive_seed(derive_seed(s.seed, market_stream), a);
    auto path = simulate_market(m, s.cycle.warmup_days + days);
    AgentConfig cfg = s.agent;
    cfg.seed = derive_seed(derive_seed(s.seed, agent_stream), a);
    AgentState agent = make_agent(cfg, policy);
    for (std::size_t i = 0; i < s.cycle.warmup_days; ++i) observe(agent, path[i]);
    path.erase(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(s.cycle.warmup_days));
    d.agents.push_back(std::move(agent));
    d.days.push_back(std::move(path));
  }
  return d;
}
}  // namespace

Evaluation evaluate_policy(const Scenario& s, const Policy& policy, std::span<Judge* const> judges) {
  auto desks = make_desks(s, policy, kEvaluationMarket, kEvaluationAgent, s.cycle.evaluation_days);
  auto pooled = observe_assets(desks.agents, desks.days, s.cycle.episode_length);
  auto judged = judge_episodes(std::move(pooled.episodes), judges);
  Evaluation e;
  e.mean_scores = judged.mean_scores;
  e.mape = percent_of(pooled.abs_error_sum, pooled.transitions.size());
  e.da = percent_of(static_cast<double>(pooled.hits), pooled.transitions.size());
  e.episodes = judged.episodes.size();
  return e;
}

nlohmann::ordered_json to_json(const CycleReport& r) {
  nlohmann::ordered_json j;
  j["cycle"] = r.cycle;
  j["mean_scores"] = dim_json(r.mean_scores);
  auto& def = j["deficient"] = nlohmann::ordered_json::array();
  for (Dimension d : r.deficient) def.push_back(std::string(tracejudge::to_string(d)));
  j["activated"] = r.activated;
  j["mean_penalty"] = r.mean_penalty;
  j["mean_tau_penalty"] = r.mean_tau_penalty;
  j["mean_alpha_penalty"] = r.mean_alpha_penalty;
  j["mape"] = r.mape;
  j["da"] = r.da;
  j["parameter_change"] = r.parameter_change;
  j["evaluation"] = r.evaluation ? to_json(*r.evaluation) : nlohmann::ordered_json(nullptr);
  j["warnings"] = r.warnings;
  return j;
}

CycleReport run_cycle(std::span<AgentState> agents, std::span<const std::vector<MarketDay>> windows,
                      std::span<Judge* const> judges, const RewardConfig& reward,
                      const CycleConfig& cfg, std::size_t cycle_index, Archive* archive) {
  cfg.validate();
  if (agents.empty()) throw ConfigError("run_cycle: no assets");
  CycleReport report;
  report.cycle = cycle_index;
  auto obs = observe_assets(agents, windows, cfg.episode_length);
  auto judged = judge_episodes(std::move(obs.episodes), judges, archive);
  report.mean_scores = judged.mean_scores;
  report.mape = percent_of(obs.abs_error_sum, obs.transitions.size());
  report.da = percent_of(static_cast<double>(obs.hits), obs.transitions.size());
  for (Dimension d : kDimensions) {
    if (judged.mean_scores[d] < reward.theta()) report.deficient.push_back(d);
  }
  report.activated = !report.deficient.empty();
  if (!report.activated || obs.transitions.empty()) return report;

  const CreditMap credit = cfg.credit == CreditMode::Targeted ? default_credit_map() : uniform_credit_map();
  const std::size_t n_ep = judged.episodes.size();
  std::vector<PenaltyBreakdown> per_episode;
  per_episode.reserve(n_ep);
  for (std::size_t e = 0; e < n_ep; ++e) {
    std::vector<FailureLabel> labels;
    if (cfg.credit == CreditMode::Targeted) {
      for (const auto& j : judged.judgments[e]) {
        for (const auto& f : j.failures) labels.push_back(f.label);
      }
    }
    auto b = credit_assign(hinge_penalty(judged.consensus[e], reward), credit, labels);
    for (auto& w : b.warnings) report.warnings.push_back(fmt::format("{}: {}", judged.episodes[e].id, w));
    report.mean_penalty += b.total / static_cast<double>(n_ep);
    report.mean_tau_penalty += b.tau / static_cast<double>(n_ep);
    report.mean_alpha_penalty += b.alpha / static_cast<double>(n_ep);
    per_episode.push_back(std::move(b));
  }
  if (cfg.penalty_enabled) {
    // Transition t of an asset belongs to the episode containing its day t.
    for (std::size_t t = 0; t < obs.transitions.size(); ++t) {
      const std::size_t e = obs.episode_of[t];
      if (e == std::string::npos) continue;
      obs.transitions[t].tau_penalty = per_episode[e].tau;
      obs.transitions[t].alpha_penalty = per_episode[e].alpha;
    }
  }
  const Policy before = agents.front().policy;
  const Policy after = finetune_controller(before, obs.transitions, cfg.finetune);
  for (auto& agent : agents) agent.policy = after;
  report.parameter_change = actor_distance(before, after);
  return report;
}

LoopResult run_closed_loop(const Scenario& s, std::span<Judge* const> judges, Archive* archive,
                           const CycleCallback& on_cycle) {
  s.cycle.validate();
  LoopResult result;
  result.baseline = evaluate_policy(s, s.policy, judges);
  auto desks = make_desks(s, s.policy, kObservationMarket, kObservationAgent, s.cycle.cycles * s.cycle.days);
  for (std::size_t c = 0; c < s.cycle.cycles; ++c) {
    std::vector<std::vector<MarketDay>> windows;
    for (const auto& path : desks.days) {
      const auto from = path.begin() + static_cast<std::ptrdiff_t>(c * s.cycle.days);
      windows.emplace_back(from, from + static_cast<std::ptrdiff_t>(s.cycle.days));
    }
    auto report = run_cycle(desks.agents, windows, judges, s.reward, s.cycle, c + 1, archive);
    report.evaluation = evaluate_policy(s, desks.agents.front().policy, judges);
    if (on_cycle) on_cycle(report);
    result.cycles.push_back(std::move(report));
  }
  result.final_policy = desks.agents.front().policy;
  return result;
}

std::vector<Episode> simulate_corpus(const MarketModel& market, const AgentConfig& agent,
                                     const Policy& policy, std::size_t days, std::size_t warmup,
                                     std::uint64_t seed) {
  if (warmup < kWarmupDays) throw ConfigError(fmt::format("corpus: warmup must be at least {}", kWarmupDays));
  MarketModel m = market;
  m.seed = derive_seed(seed, kCorpusMarket);
  const auto path = simulate_market(m, warmup + days);
  AgentConfig cfg = agent;
  cfg.seed = derive_seed(seed, kCorpusAgent);
  AgentState state = make_agent(cfg, policy);
  for (std::size_t i = 0; i < warmup; ++i) observe(state, path[i]);
  std::vector<BehavioralTrace> traces;
  traces.reserve(days);
  for (std::size_t i = warmup; i < path.size(); ++i) traces.push_back(agent_step(state, path[i]).trace);
  return group_episodes(traces);
}

ForecastPanel forecast_panel(const Scenario& s, std::span<const std::pair<std::string, Policy>> policies,
                             bool random_walk) {
  s.cycle.validate();
  if (policies.empty()) throw ConfigError("forecast panel needs at least one policy");
  ForecastPanel p;
  const std::size_t T = s.cycle.evaluation_days - 1;  // the last day has no realized successor
  for (std::size_t a = 0; a < s.cycle.assets; ++a) p.assets.push_back(fmt::format("a{:02}", a));
  for (std::size_t t = 0; t < T; ++t) p.days.push_back(fmt::format("d{:04}", t));
  const auto grid = [&] { return std::vector<std::vector<double>>(s.cycle.assets, std::vector<double>(T)); };
  p.previous = grid();
  p.actual = grid();
  p.vix = grid();
  for (const auto& [name, policy] : policies) {
    auto desks = make_desks(s, policy, kEvaluationMarket, kEvaluationAgent, s.cycle.evaluation_days);
    auto& f = p.forecast.emplace_back(grid());
    p.models.push_back(name);
    for (std::size_t a = 0; a < s.cycle.assets; ++a) {
      for (std::size_t t = 0; t < s.cycle.evaluation_days; ++t) {
        const auto step = agent_step(desks.agents[a], desks.days[a][t]);
        if (t + 1 == s.cycle.evaluation_days) break;
        f[a][t] = step.trace.prediction;
        p.previous[a][t] = desks.days[a][t].price;
        p.actual[a][t] = desks.days[a][t + 1].price;
        p.vix[a][t] = desks.days[a][t].vix;
      }
    }
  }
  if (random_walk) {
    p.models.push_back("random_walk");
    p.forecast.push_back(p.previous);
  }
  p.validate();
  return p;
}

nlohmann::ordered_json to_json(const SweepRow& r) {
  nlohmann::ordered_json j;
  j["lambda"] = r.lambda;
  j["mape"] = r.mape;
  j["da"] = r.da;
  j["deficient_score"] = r.deficient_score;
  j["stable"] = r.stable;
  return j;
}

bool stable_sequence(std::span<const DimMap<double>> means) {
  for (Dimension d : kDimensions) {
    int last = 0;
    int changes = 0;
    for (std::size_t i = 1; i < means.size(); ++i) {
      const double diff = means[i][d] - means[i - 1][d];
      const int sgn = (diff > 0.0) - (diff < 0.0);
      if (sgn == 0) continue;
      if (last != 0 && sgn != last) ++changes;
      last = sgn;
    }
    if (changes >= 2) return false;
  }
  return true;
}

std::vector<SweepRow> lambda_sweep(const Scenario& scenario, std::span<const double> lambdas,
                                   std::span<Judge* const> judges) {
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    Scenario s = scenario;
    s.reward = scenario.reward.with_lambda(lambda);
    const auto run = run_closed_loop(s, judges);
    SweepRow row;
    row.lambda = lambda;
    std::vector<DimMap<double>> seq{run.baseline.mean_scores};
    for (const auto& c : run.cycles) seq.push_back(c.evaluation->mean_scores);
    const auto& last = run.cycles.back().evaluation.value();
    row.mape = last.mape;
    row.da = last.da;
    int n = 0;
    for (Dimension d : kDimensions) {
      if (run.baseline.mean_scores[d] < s.reward.theta()) {
        row.deficient_score += last.mean_scores[d];
        ++n;
      }
    }
    row.deficient_score = n ? row.deficient_score / n : 0.0;
    row.stable = stable_sequence(seq);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tracejudge::sim
