#include "crelab/mitigate/endpoint.hpp"

#include "crelab/common/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace crelab::mitigate {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

class InFlightSlot {
 public:
  InFlightSlot(std::mutex& mu, std::condition_variable& cv, unsigned& count, unsigned limit)
      : mu_(mu), cv_(cv), count_(count) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return count_ < limit; });
    ++count_;
  }
  ~InFlightSlot() {
    {
      std::lock_guard lock(mu_);
      --count_;
    }
    cv_.notify_one();
  }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  unsigned& count_;
};

}  // namespace

EndpointConfig EndpointConfig::from_env() {
  EndpointConfig c;
  c.url = env_or_empty(kEndpointUrlEnv);
  c.model = env_or_empty(kModelEnv);
  c.api_key = env_or_empty(kApiKeyEnv);
  if (c.url.empty()) throw ConfigError(std::string(kEndpointUrlEnv) + " is not set");
  if (c.model.empty()) throw ConfigError(std::string(kModelEnv) + " is not set");
  return c;
}

ChatEndpointGenerator::ChatEndpointGenerator(EndpointConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint url needs a scheme: '" + config_.url + "'");
  }
  const std::string scheme = config_.url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme '" + scheme + "'");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw ConfigError("https endpoints need a build with OpenSSL");
#endif
  const auto path_start = config_.url.find('/', scheme_end + 3);
  scheme_host_port_ = config_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/v1/chat/completions" : config_.url.substr(path_start);
  if (config_.max_in_flight == 0) throw ConfigError("max_in_flight must be >= 1");
  if (config_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

std::string chat_request_body(const EndpointConfig& config, const GenerationRequest& request) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = config.temperature;
  body["seed"] = request.seed;
  return body.dump();
}

std::string parse_chat_reply(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BackendError("endpoint reply is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw BackendError("endpoint reply has no choices[0].message.content");
  }
}

std::string ChatEndpointGenerator::post_once(const std::string& body, bool& retryable) {
  httplib::Client cli(scheme_host_port_);
  if (!cli.is_valid()) throw ConfigError("invalid endpoint url '" + config_.url + "'");
  const auto secs = std::chrono::duration<double>(config_.timeout_seconds);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(secs);
  cli.set_connection_timeout(usec);
  cli.set_read_timeout(usec);
  cli.set_write_timeout(usec);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    retryable = true;
    throw BackendError("endpoint request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    retryable = true;
    throw BackendError("endpoint returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    retryable = false;
    throw BackendError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  retryable = false;
  return parse_chat_reply(res->body);
}

std::string ChatEndpointGenerator::complete(const GenerationRequest& request) {
  InFlightSlot slot(mu_, cv_, in_flight_, config_.max_in_flight);
  const std::string body = chat_request_body(config_, request);
  double backoff = config_.backoff_seconds;
  for (int attempt = 0;; ++attempt) {
    bool retryable = false;
    try {
      return post_once(body, retryable);
    } catch (const BackendError&) {
      if (!retryable || attempt >= config_.max_retries) throw;
    }
    std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff *= 2.0;
  }
}

}  // namespace crelab::mitigate
