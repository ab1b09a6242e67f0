// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cnkit/error.hpp"
#include "cnkit/toxicity.hpp"

using namespace cnkit;
using namespace cnkit::metrics;
using namespace std::chrono_literals;

namespace {

class ScriptedTransport final : public ToxicityTransport {
 public:
  explicit ScriptedTransport(std::deque<HttpResult> replies) : replies_(std::move(replies)) {}

  HttpResult post(const std::string& endpoint, const std::string& key, const std::string& body) override {
    std::lock_guard lock(mu_);
    ++calls;
    last_endpoint = endpoint;
    last_key = key;
    last_body = body;
    if (replies_.empty()) return {500, ""};
    auto r = replies_.front();
    if (replies_.size() > 1) replies_.pop_front();
    return r;
  }

  int calls = 0;
  std::string last_endpoint, last_key, last_body;

 private:
  std::mutex mu_;
  std::deque<HttpResult> replies_;
};

ToxicityConfig config() { return {.endpoint = "http://scorer.invalid/score", .api_key = "k"}; }

}  // namespace

TEST_CASE("scores come from the transport and are cached") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{{200, R"({"score":0.42})"}});
  ToxicityClient client(config(), t, [](auto) {});
  CHECK(client.score("you are wrong") == 0.42);
  CHECK(client.score("you are wrong") == 0.42);
  CHECK(t->calls == 1);
  CHECK(client.cache_size() == 1);
  CHECK(nlohmann::json::parse(t->last_body)["text"] == "you are wrong");
  CHECK(t->last_key == "k");
}

TEST_CASE("transient failures are retried with doubling backoff") {
  auto t = std::make_shared<ScriptedTransport>(
      std::deque<HttpResult>{{503, ""}, {0, ""}, {200, R"({"score":0.1})"}});
  std::vector<std::chrono::milliseconds> sleeps;
  ToxicityClient client(config(), t, [&](auto d) { sleeps.push_back(d); });
  CHECK(client.score("text") == 0.1);
  CHECK(t->calls == 3);
  CHECK(sleeps == std::vector<std::chrono::milliseconds>{250ms, 500ms});
}

TEST_CASE("exhausted retries surface the last status") {
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{{429, ""}});
  ToxicityClient client(config(), t, [](auto) {});
  try {
    client.score("text");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.status() == 429);
  }
  CHECK(t->calls == 4);
  CHECK(client.cache_size() == 0);
}

TEST_CASE("malformed or out-of-range scores are not accepted") {
  for (const std::string body : {"{}", "oops", R"({"score":1.5})", R"({"score":"high"})"}) {
    auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{{200, body}});
    ToxicityClient client(config(), t, [](auto) {});
    CHECK_THROWS_AS(client.score("x"), TransportError);
  }
}

TEST_CASE("missing credentials are a configuration error") {
  ::unsetenv("TOXICITY_API_KEY");
  CHECK_THROWS_AS(ToxicityConfig::from_env("http://x"), ConfigError);
  ::setenv("TOXICITY_API_KEY", "secret", 1);
  CHECK(ToxicityConfig::from_env("http://x").api_key == "secret");
  ::unsetenv("TOXICITY_API_KEY");
  auto t = std::make_shared<ScriptedTransport>(std::deque<HttpResult>{});
  CHECK_THROWS_AS(ToxicityClient({.endpoint = "http://x", .api_key = ""}, t), ConfigError);
}

TEST_CASE("http transport talks to a local scorer") {
  httplib::Server server;
  std::string auth;
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    const auto text = nlohmann::json::parse(req.body)["text"].get<std::string>();
    res.set_content(nlohmann::json{{"score", text.size() / 100.0}}.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ToxicityClient client({.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/score", .api_key = "tok"},
                        make_http_transport(2s), [](auto) {});
  CHECK(client.score("0123456789") == doctest::Approx(0.1));
  CHECK(auth == "Bearer tok");
  server.stop();
  th.join();
}
