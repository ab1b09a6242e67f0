// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

namespace cnkit::metrics {

struct HttpResult {
  int status = 0;  // 0 when no response was received
  std::string body;
};

// Request/response channel to a toxicity scoring service. Implementations
// must be callable from several threads.
class ToxicityTransport {
 public:
  virtual ~ToxicityTransport() = default;
  virtual HttpResult post(const std::string& endpoint, const std::string& api_key, const std::string& json_body) = 0;
};

// Plain HTTP(S) POST via cpp-httplib. The key travels as a bearer token.
std::shared_ptr<ToxicityTransport> make_http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(10));

struct ToxicityConfig {
  std::string endpoint;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};

  // Reads TOXICITY_API_KEY; throws ConfigError when it is unset or empty.
  static ToxicityConfig from_env(std::string endpoint);
};

// Sends {"text": ...}, expects {"score": p} with p in [0, 1]. Results are
// cached by the SHA-256 of the text.
class ToxicityClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  ToxicityClient(ToxicityConfig config, std::shared_ptr<ToxicityTransport> transport, Sleeper sleeper = {});

  double score(std::string_view text);

  std::size_t cache_size() const;

 private:
  ToxicityConfig config_;
  std::shared_ptr<ToxicityTransport> transport_;
  Sleeper sleeper_;
  mutable std::shared_mutex cache_mu_;
  std::unordered_map<std::string, double> cache_;
};

}  // namespace cnkit::metrics
