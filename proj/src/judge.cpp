#include "tracejudge/judge.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "tracejudge/error.hpp"

namespace tracejudge {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<FailureLabel> Judgment::failure_for(Dimension d) const {
  for (const auto& f : failures) {
    if (f.dimension == d) return f.label;
  }
  return std::nullopt;
}

void validate(const Judgment& j) {
  for (Dimension d : kDimensions) {
    if (j.scores[d] < 1 || j.scores[d] > 5) {
      throw JudgeError(fmt::format("score for {} is {}, outside 1..5", to_string(d), j.scores[d]));
    }
  }
  std::array<bool, 6> seen{};
  for (const auto& f : j.failures) {
    const auto& meta = info(f.label);
    if (meta.dimension != f.dimension) {
      throw JudgeError(fmt::format("label {} belongs to {}, not {}", meta.name,
                                   to_string(meta.dimension), to_string(f.dimension)));
    }
    if (j.scores[f.dimension] >= kLabelThreshold) {
      throw JudgeError(fmt::format("failure label on {} but its score {} is not below {}",
                                   to_string(f.dimension), j.scores[f.dimension],
                                   kLabelThreshold));
    }
    auto& flag = seen[static_cast<std::size_t>(f.dimension)];
    if (flag) throw JudgeError(fmt::format("more than one failure label for {}", to_string(f.dimension)));
    flag = true;
  }
}

std::string render_judgment(const Judgment& j) {
  // ordered_json stores members in a vector; build each member before inserting it.
  ordered_json scores = ordered_json::object();
  ordered_json just = ordered_json::object();
  for (Dimension d : kDimensions) scores[std::string(to_string(d))] = j.scores[d];
  for (Dimension d : kDimensions) just[std::string(to_string(d))] = j.justifications[d];
  ordered_json failures = ordered_json::array();
  for (const auto& f : j.failures) {
    failures.push_back(
        {{"dimension", std::string(to_string(f.dimension))}, {"label", std::string(to_string(f.label))}});
  }
  ordered_json out;
  out["scores"] = std::move(scores);
  out["justifications"] = std::move(just);
  out["failures"] = std::move(failures);
  return out.dump();
}

namespace {

/// Top-level balanced {...} spans that parse as JSON objects.
std::vector<json> extract_objects(std::string_view raw) {
  std::vector<json> found;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (depth > 0 && in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (depth++ == 0) start = i;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) {
        auto parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) found.push_back(std::move(parsed));
      }
    }
  }
  return found;
}

}  // namespace

Judgment parse_judgment(std::string_view raw, std::string judge_id, std::string episode_id) {
  const std::string raw_copy(raw);
  auto fail = [&](const std::string& why) -> JudgeError {
    return JudgeError(fmt::format("judgment from {} for {}: {}", judge_id, episode_id, why), raw_copy);
  };
  const auto objects = extract_objects(raw);
  if (objects.empty()) throw fail("no JSON object found");
  if (objects.size() > 1) throw fail(fmt::format("{} JSON objects found, expected one", objects.size()));
  const json& o = objects.front();

  Judgment j;
  j.judge_id = std::move(judge_id);
  j.episode_id = std::move(episode_id);

  auto sit = o.find("scores");
  if (sit == o.end() || !sit->is_object()) throw fail("missing 'scores' object");
  for (const auto& [key, _] : sit->items()) {
    if (!parse_dimension(key)) throw fail(fmt::format("unknown dimension '{}' in scores", key));
  }
  for (Dimension d : kDimensions) {
    auto v = sit->find(std::string(to_string(d)));
    if (v == sit->end()) throw fail(fmt::format("missing score for {}", to_string(d)));
    if (!v->is_number_integer()) throw fail(fmt::format("score for {} is not an integer", to_string(d)));
    const auto s = v->get<std::int64_t>();
    if (s < 1 || s > 5) throw fail(fmt::format("score for {} is {}, outside 1..5", to_string(d), s));
    j.scores[d] = static_cast<int>(s);
  }

  if (auto jit = o.find("justifications"); jit != o.end()) {
    if (!jit->is_object()) throw fail("'justifications' must be an object");
    for (const auto& [key, value] : jit->items()) {
      auto d = parse_dimension(key);
      if (!d) throw fail(fmt::format("unknown dimension '{}' in justifications", key));
      if (!value.is_string()) throw fail(fmt::format("justification for {} is not text", key));
      j.justifications[*d] = value.get<std::string>();
    }
  }

  if (auto fit = o.find("failures"); fit != o.end() && !fit->is_null()) {
    if (!fit->is_array()) throw fail("'failures' must be an array");
    for (const auto& entry : *fit) {
      if (!entry.is_object() || !entry.contains("dimension") || !entry.contains("label") ||
          !entry["dimension"].is_string() || !entry["label"].is_string()) {
        throw fail("failure entries need string 'dimension' and 'label'");
      }
      auto d = parse_dimension(entry["dimension"].get<std::string>());
      if (!d) throw fail(fmt::format("unknown failure dimension '{}'", entry["dimension"].get<std::string>()));
      auto label = parse_failure_label(entry["label"].get<std::string>());
      if (!label) throw fail(fmt::format("unknown failure label '{}'", entry["label"].get<std::string>()));
      j.failures.push_back({*d, *label});
    }
  }
  std::stable_sort(j.failures.begin(), j.failures.end(),
                   [](const Failure& a, const Failure& b) { return a.dimension < b.dimension; });
  try {
    validate(j);
  } catch (const JudgeError& e) {
    throw fail(e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// Prompt

namespace {
constexpr std::string_view kSchemaBlock = R"({
  "scores": {"RD": <int>, "RT": <int>, "AD": <int>,
             "RC": <int>, "SC": <int>, "ER": <int>},
  "justifications": {"RD": "<text referencing trace fields>",
                     "RT": "<text>", "AD": "<text>",
                     "RC": "<text>", "SC": "<text>", "ER": "<text>"},
  "failures": [{"dimension": "<RD|RT|AD|RC|SC|ER>",
                "label": "<label-from-vocabulary>"}]
})";

std::string_view subspace_text(Subspace s) {
  switch (s) {
    case Subspace::TauOnly:
      return "delta_tau";
    case Subspace::AlphaOnly:
      return "delta_alpha";
    case Subspace::Both:
      return "delta_tau, delta_alpha";
  }
  return "";
}
}  // namespace

Prompt build_prompt(const Episode& episode) {
  validate(episode);
  std::string user = fmt::format(
      "Episode {}: {} consecutive daily behavioral traces, oldest first, one JSON record per "
      "line.\n\n",
      episode.id, episode.traces.size());
  for (const auto& t : episode.traces) {
    user += serialize_trace(t);
    user += '\n';
  }
  user += "\nOutput schema:\n";
  user += kSchemaBlock;
  user += fmt::format(
      "\n\nFailure labels (label: dimension; action subspace). Attach at most one label per "
      "dimension, and only to a dimension scored below {}:\n",
      kLabelThreshold);
  for (const auto& meta : kFailureLabels) {
    user += fmt::format("{}: {}; {}\n", meta.name, to_string(meta.dimension),
                        subspace_text(meta.subspace));
  }
  return {std::string(system_message()), std::move(user)};
}

// ---------------------------------------------------------------------------
// Configuration and HTTP judge

std::optional<HttpAdapter> parse_adapter(std::string_view s) {
  if (s == "neutral") return HttpAdapter::Neutral;
  if (s == "openai_chat") return HttpAdapter::OpenAIChat;
  if (s == "anthropic_messages") return HttpAdapter::AnthropicMessages;
  return std::nullopt;
}

std::string_view to_string(HttpAdapter a) {
  switch (a) {
    case HttpAdapter::Neutral:
      return "neutral";
    case HttpAdapter::OpenAIChat:
      return "openai_chat";
    case HttpAdapter::AnthropicMessages:
      return "anthropic_messages";
  }
  return "neutral";
}

void JudgeConfig::validate() const {
  if (id.empty()) throw ConfigError("judge id must not be empty");
  if (temperature != 0.0) throw ConfigError(fmt::format("judge {}: temperature must be 0", id));
  if (max_tokens != 2000) throw ConfigError(fmt::format("judge {}: max_tokens must be 2000", id));
  if (retries < 0) throw ConfigError(fmt::format("judge {}: retries must be non-negative", id));
  if (provider == Provider::Http) {
    if (endpoint.rfind("http://", 0) != 0 && endpoint.rfind("https://", 0) != 0) {
      throw ConfigError(fmt::format("judge {}: endpoint must be an http(s) URL", id));
    }
    if (timeout.count() <= 0) throw ConfigError(fmt::format("judge {}: timeout must be positive", id));
  }
}

std::string build_request_body(const JudgeConfig& cfg, const Prompt& prompt) {
  ordered_json body;
  switch (cfg.adapter) {
    case HttpAdapter::Neutral:
      body["model"] = cfg.model_name;
      body["system"] = prompt.system;
      body["user"] = prompt.user;
      body["temperature"] = cfg.temperature;
      body["max_tokens"] = cfg.max_tokens;
      break;
    case HttpAdapter::OpenAIChat:
      body["model"] = cfg.model_name;
      body["messages"] = ordered_json::array(
          {{{"role", "system"}, {"content", prompt.system}}, {{"role", "user"}, {"content", prompt.user}}});
      body["temperature"] = cfg.temperature;
      body["max_tokens"] = cfg.max_tokens;
      break;
    case HttpAdapter::AnthropicMessages:
      body["model"] = cfg.model_name;
      body["system"] = prompt.system;
      body["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt.user}}});
      body["temperature"] = cfg.temperature;
      body["max_tokens"] = cfg.max_tokens;
      break;
  }
  return body.dump();
}

std::string extract_response_text(const JudgeConfig& cfg, const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw JudgeError("provider response is not JSON", body);
  try {
    switch (cfg.adapter) {
      case HttpAdapter::Neutral:
        return j.at("text").get<std::string>();
      case HttpAdapter::OpenAIChat:
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      case HttpAdapter::AnthropicMessages: {
        std::string out;
        for (const auto& block : j.at("content")) {
          if (block.value("type", "") == "text") out += block.at("text").get<std::string>();
        }
        return out;
      }
    }
  } catch (const json::exception& e) {
    throw JudgeError(fmt::format("unexpected provider response shape: {}", e.what()), body);
  }
  return {};
}

HttpJudge::HttpJudge(JudgeConfig cfg, std::unique_ptr<Transport> transport, Sleeper sleeper)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), sleep_(std::move(sleeper)) {
  cfg_.validate();
  if (!transport_) throw ConfigError(fmt::format("judge {}: no transport", cfg_.id));
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Judgment HttpJudge::evaluate(const Episode& episode) {
  const auto body = build_request_body(cfg_, build_prompt(episode));
  auto delay = cfg_.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      sleep_(delay);
      delay *= 2;
    }
    std::string response;
    try {
      response = transport_->post(body);
    } catch (const TransportError& e) {
      last_error = e.what();
      spdlog::warn("judge {} episode {} attempt {} failed: {}", cfg_.id, episode.id, attempt + 1,
                   last_error);
      continue;
    }
    return parse_judgment(extract_response_text(cfg_, response), cfg_.id, episode.id);
  }
  throw JudgeError(fmt::format("judge {} episode {}: transport failed after {} attempts: {}",
                               cfg_.id, episode.id, cfg_.retries + 1, last_error));
}

std::unique_ptr<Judge> make_judge(const JudgeConfig& cfg) {
  cfg.validate();
  if (cfg.provider == Provider::Reference) return std::make_unique<ReferenceJudge>(cfg.id);
  return std::make_unique<HttpJudge>(cfg, make_http_transport(cfg));
}

Judgment judge_episode(const JudgeConfig& cfg, const Episode& episode) {
  return make_judge(cfg)->evaluate(episode);
}

}  // namespace tracejudge
