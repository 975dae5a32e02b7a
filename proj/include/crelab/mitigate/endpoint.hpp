#pragma once

#include "crelab/mitigate/generator.hpp"

#include <condition_variable>
#include <mutex>
#include <string>

namespace crelab::mitigate {

inline constexpr const char* kEndpointUrlEnv = "CRELAB_ENDPOINT_URL";
inline constexpr const char* kModelEnv = "CRELAB_MODEL";
inline constexpr const char* kApiKeyEnv = "CRELAB_API_KEY";

struct EndpointConfig {
  /// Full URL of a chat-completions style endpoint, e.g.
  /// http://localhost:8080/v1/chat/completions
  std::string url;
  std::string model;
  std::string api_key;
  int max_retries = 3;
  double timeout_seconds = 60.0;
  double backoff_seconds = 0.5;  // doubled after every failed attempt
  unsigned max_in_flight = 4;
  double temperature = 0.0;

  /// Reads url, model and api key from the environment. Missing url or model
  /// raises ConfigError.
  static EndpointConfig from_env();
};

/// One user message in, one assistant message out. Connection failures,
/// timeouts, 429 and 5xx are retried; other statuses fail immediately.
class ChatEndpointGenerator final : public Generator {
 public:
  explicit ChatEndpointGenerator(EndpointConfig config);

  std::string complete(const GenerationRequest& request) override;
  std::string name() const override { return "endpoint"; }

  const EndpointConfig& config() const { return config_; }

 private:
  std::string post_once(const std::string& body, bool& retryable);

  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_;
  std::mutex mu_;
  std::condition_variable cv_;
  unsigned in_flight_ = 0;
};

/// Request body for `prompt`; exposed for tests.
std::string chat_request_body(const EndpointConfig& config, const GenerationRequest& request);

/// Extracts choices[0].message.content; throws BackendError otherwise.
std::string parse_chat_reply(const std::string& body);

}  // namespace crelab::mitigate
