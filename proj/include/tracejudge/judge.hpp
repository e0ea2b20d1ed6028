#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracejudge/dimension.hpp"
#include "tracejudge/trace.hpp"

namespace tracejudge {

struct Failure {
  Dimension dimension;
  FailureLabel label;

  friend bool operator==(const Failure&, const Failure&) = default;
};

/// Scores below this carry an optional failure label.
inline constexpr int kLabelThreshold = 3;

struct Judgment {
  std::string judge_id;
  std::string episode_id;
  DimMap<int> scores;
  DimMap<std::string> justifications;
  std::vector<Failure> failures;  // ordered by dimension, at most one per dimension

  std::optional<FailureLabel> failure_for(Dimension d) const;

  friend bool operator==(const Judgment&, const Judgment&) = default;
};

/// Throws JudgeError naming the first violated rule.
void validate(const Judgment& j);

/// Compact output-schema JSON: scores, justifications, failures.
std::string render_judgment(const Judgment& j);

/// Extracts exactly one JSON object from `raw` (surrounding prose and code fences are
/// ignored) and validates it. Throws JudgeError carrying `raw`.
Judgment parse_judgment(std::string_view raw, std::string judge_id, std::string episode_id);

struct Prompt {
  std::string system;
  std::string user;
};

/// The fixed evaluator system message.
std::string_view system_message();

Prompt build_prompt(const Episode& episode);

/// Deterministic rule-based scorer.
Judgment reference_judge(const Episode& episode, std::string judge_id = "reference");

enum class Provider { Http, Reference };

/// Request/response shape for HTTP providers.
enum class HttpAdapter { Neutral, OpenAIChat, AnthropicMessages };

std::optional<HttpAdapter> parse_adapter(std::string_view s);
std::string_view to_string(HttpAdapter a);

struct JudgeConfig {
  std::string id = "reference";
  Provider provider = Provider::Reference;
  std::string endpoint;  // scheme://host[:port]/path
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 2000;
  std::chrono::milliseconds timeout{60000};
  int retries = 3;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
  HttpAdapter adapter = HttpAdapter::Neutral;
  std::string api_key_env;  // environment variable holding the credential, if any

  /// Throws ConfigError.
  void validate() const;
};

/// Failure raised by a Transport for one attempt; retried by HttpJudge.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// Sends a JSON body and returns the response body. Throws TransportError.
  virtual std::string post(const std::string& body) = 0;
};

/// cpp-httplib transport for http:// and https:// endpoints.
std::unique_ptr<Transport> make_http_transport(const JudgeConfig& cfg);

/// Request body for the configured adapter.
std::string build_request_body(const JudgeConfig& cfg, const Prompt& prompt);

/// Model text from a provider response for the configured adapter. Throws JudgeError.
std::string extract_response_text(const JudgeConfig& cfg, const std::string& body);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual const std::string& id() const = 0;
  virtual Judgment evaluate(const Episode& episode) = 0;
};

class ReferenceJudge final : public Judge {
 public:
  explicit ReferenceJudge(std::string id = "reference") : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  Judgment evaluate(const Episode& episode) override { return reference_judge(episode, id_); }

 private:
  std::string id_;
};

class HttpJudge final : public Judge {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  HttpJudge(JudgeConfig cfg, std::unique_ptr<Transport> transport, Sleeper sleeper = {});
  const std::string& id() const override { return cfg_.id; }
  /// Retries transport failures with exponential backoff; parse failures are not retried.
  Judgment evaluate(const Episode& episode) override;

 private:
  JudgeConfig cfg_;
  std::unique_ptr<Transport> transport_;
  Sleeper sleep_;
};

std::unique_ptr<Judge> make_judge(const JudgeConfig& cfg);

Judgment judge_episode(const JudgeConfig& cfg, const Episode& episode);

}  // namespace tracejudge
