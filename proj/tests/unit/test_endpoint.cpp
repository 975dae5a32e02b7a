#include "crelab/common/error.hpp"
#include "crelab/mitigate/endpoint.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace crelab;
using namespace crelab::mitigate;

namespace {

// Local chat-completions server. `plan` gives the status for each request in
// turn; once exhausted every request gets 200.
class FakeServer {
 public:
  explicit FakeServer(std::vector<int> plan) : plan_(std::move(plan)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const std::size_t n = hits_++;
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      const int status = n < plan_.size() ? plan_[n] : 200;
      res.status = status;
      if (status == 200) {
        const auto in = nlohmann::json::parse(req.body);
        nlohmann::json out;
        out["choices"] = nlohmann::json::array(
            {{{"message", {{"role", "assistant"}, {"content", "echo: " + in["messages"][0]["content"].get<std::string>()}}}}});
        res.set_content(out.dump(), "application/json");
      } else {
        res.set_content("error", "text/plain");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::size_t hits() const { return hits_; }
  std::string last_auth() const { return last_auth_; }
  std::string last_body() const { return last_body_; }

 private:
  httplib::Server server_;
  std::vector<int> plan_;
  std::atomic<std::size_t> hits_{0};
  std::string last_auth_;
  std::string last_body_;
  int port_ = 0;
  std::thread thread_;
};

EndpointConfig cfg(const std::string& url) {
  EndpointConfig c;
  c.url = url;
  c.model = "toy-chat";
  c.api_key = "sk-test";
  c.backoff_seconds = 0.01;
  c.timeout_seconds = 5;
  return c;
}

}  // namespace

TEST_CASE("request body and reply parsing") {
  GenerationRequest r;
  r.prompt = "hi \"there\"";
  r.seed = 9;
  const auto body = chat_request_body(cfg("http://x"), r);
  CHECK(body == R"({"model":"toy-chat","messages":[{"content":"hi \"there\"","role":"user"}],"temperature":0.0,"seed":9})");
  CHECK(parse_chat_reply(R"({"choices":[{"message":{"content":"ok"}}]})") == "ok");
  CHECK_THROWS_AS(parse_chat_reply("not json"), BackendError);
  CHECK_THROWS_AS(parse_chat_reply(R"({"choices":[]})"), BackendError);
}

TEST_CASE("url and env validation") {
  CHECK_THROWS_AS(ChatEndpointGenerator(cfg("localhost:8080")), ConfigError);
  CHECK_THROWS_AS(ChatEndpointGenerator(cfg("ftp://host/x")), ConfigError);
  ::unsetenv(kEndpointUrlEnv);
  CHECK_THROWS_AS(EndpointConfig::from_env(), ConfigError);
  ::setenv(kEndpointUrlEnv, "http://127.0.0.1:1", 1);
  ::setenv(kModelEnv, "m", 1);
  const auto c = EndpointConfig::from_env();
  CHECK(c.url == "http://127.0.0.1:1");
  CHECK(c.model == "m");
  ::unsetenv(kEndpointUrlEnv);
  ::unsetenv(kModelEnv);
}

TEST_CASE("successful round trip against a local server") {
  FakeServer server({});
  ChatEndpointGenerator g(cfg(server.url()));
  GenerationRequest r;
  r.prompt = "hello";
  CHECK(g.complete(r) == "echo: hello");
  CHECK(server.hits() == 1);
  CHECK(server.last_auth() == "Bearer sk-test");
  CHECK(nlohmann::json::parse(server.last_body())["model"] == "toy-chat");
}

TEST_CASE("5xx and 429 are retried, 4xx is not") {
  {
    FakeServer server({500, 429});
    ChatEndpointGenerator g(cfg(server.url()));
    CHECK(g.complete({"x"}) == "echo: x");
    CHECK(server.hits() == 3);
  }
  {
    FakeServer server({503, 503, 503, 503, 503});
    ChatEndpointGenerator g(cfg(server.url()));
    CHECK_THROWS_AS(g.complete({"x"}), BackendError);
    CHECK(server.hits() == 4);
  }
  {
    FakeServer server({400});
    ChatEndpointGenerator g(cfg(server.url()));
    CHECK_THROWS_AS(g.complete({"x"}), BackendError);
    CHECK(server.hits() == 1);
  }
}

TEST_CASE("connection failure is a backend error after retries") {
  auto c = cfg("http://127.0.0.1:1/v1/chat/completions");
  c.max_retries = 1;
  c.timeout_seconds = 1;
  ChatEndpointGenerator g(c);
  CHECK_THROWS_AS(g.complete({"x"}), BackendError);
}

TEST_CASE("concurrent calls share one generator") {
  FakeServer server({});
  auto c = cfg(server.url());
  c.max_in_flight = 2;
  ChatEndpointGenerator g(c);
  std::vector<std::thread> ts;
  std::atomic<int> ok{0};
  for (int i = 0; i < 6; ++i) {
    ts.emplace_back([&, i] {
      GenerationRequest r;
      r.prompt = "p" + std::to_string(i);
      if (g.complete(r) == "echo: p" + std::to_string(i)) ++ok;
    });
  }
  for (auto& t : ts) t.join();
  CHECK(ok == 6);
}
