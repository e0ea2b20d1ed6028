#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "tracejudge/error.hpp"
#include "tracejudge/judge.hpp"

namespace tracejudge {

namespace {

class HttplibTransport final : public Transport {
 public:
  explicit HttplibTransport(const JudgeConfig& cfg) : cfg_(cfg) {
    const auto scheme_end = cfg.endpoint.find("://");
    const auto path_start = cfg.endpoint.find('/', scheme_end + 3);
    base_ = cfg.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg.endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (cfg.endpoint.rfind("https://", 0) == 0) {
      throw ConfigError(fmt::format("judge {}: built without TLS support", cfg.id));
    }
#endif
    if (!cfg.api_key_env.empty()) {
      const char* key = std::getenv(cfg.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ConfigError(fmt::format("judge {}: environment variable {} is not set", cfg.id,
                                      cfg.api_key_env));
      }
      api_key_ = key;
    }
  }

  std::string post(const std::string& body) override {
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!api_key_.empty()) {
      switch (cfg_.adapter) {
        case HttpAdapter::AnthropicMessages:
          headers.emplace("x-api-key", api_key_);
          headers.emplace("anthropic-version", "2023-06-01");
          break;
        case HttpAdapter::Neutral:
        case HttpAdapter::OpenAIChat:
          headers.emplace("Authorization", "Bearer " + api_key_);
          break;
      }
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      throw TransportError(fmt::format("request failed: {}", httplib::to_string(res.error())));
    }
    if (res->status == 429 || res->status >= 500) {
      throw TransportError(fmt::format("HTTP {}", res->status));
    }
    if (res->status != 200) {
      throw JudgeError(fmt::format("judge {}: HTTP {}", cfg_.id, res->status), res->body);
    }
    return res->body;
  }

 private:
  JudgeConfig cfg_;
  std::string base_;
  std::string path_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const JudgeConfig& cfg) {
  cfg.validate();
  return std::make_unique<HttplibTransport>(cfg);
}

}  // namespace tracejudge
