// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/toxicity.hpp"

#include <cstdlib>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cnkit/error.hpp"
#include "cnkit/io.hpp"
#include "cnkit/net.hpp"

namespace cnkit::metrics {

ToxicityConfig ToxicityConfig::from_env(std::string endpoint) {
  const char* key = std::getenv("TOXICITY_API_KEY");
  if (key == nullptr || *key == '\0') throw ConfigError("TOXICITY_API_KEY is not set");
  ToxicityConfig c;
  c.endpoint = std::move(endpoint);
  c.api_key = key;
  return c;
}

ToxicityClient::ToxicityClient(ToxicityConfig config, std::shared_ptr<ToxicityTransport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (config_.api_key.empty()) throw ConfigError("toxicity client needs a credential");
  if (config_.endpoint.empty()) throw ConfigError("toxicity client needs an endpoint");
  if (!transport_) throw ConfigError("toxicity client needs a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

double ToxicityClient::score(std::string_view text) {
  const std::string key = io::sha256_hex(text);
  {
    std::shared_lock lock(cache_mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }

  const std::string body = nlohmann::json{{"text", std::string(text)}}.dump();
  auto backoff = config_.initial_backoff;
  HttpResult last;
  std::string why;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff *= 2;
    }
    last = transport_->post(config_.endpoint, config_.api_key, body);
    if (last.status != 200) {
      why = last.status == 0 ? "no response" : "HTTP " + std::to_string(last.status);
      continue;
    }
    try {
      const auto j = nlohmann::json::parse(last.body);
      const double s = j.at("score").get<double>();
      if (!(s >= 0.0 && s <= 1.0)) {
        why = "score out of range";
        continue;
      }
      std::unique_lock lock(cache_mu_);
      cache_[key] = s;
      return s;
    } catch (const nlohmann::json::exception& e) {
      why = std::string("malformed response: ") + e.what();
    }
  }
  throw TransportError(last.status, "toxicity request failed after " + std::to_string(config_.max_retries) +
                                        " retries: " + why);
}

std::size_t ToxicityClient::cache_size() const {
  std::shared_lock lock(cache_mu_);
  return cache_.size();
}

namespace {

class HttpTransport final : public ToxicityTransport {
 public:
  explicit HttpTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResult post(const std::string& endpoint, const std::string& api_key, const std::string& json_body) override {
    const auto r = net::http_post_json(endpoint, json_body, {{"Authorization", "Bearer " + api_key}}, timeout_);
    return {r.status, r.body};
  }

 private:
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::shared_ptr<ToxicityTransport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_shared<HttpTransport>(timeout);
}

}  // namespace cnkit::metrics
