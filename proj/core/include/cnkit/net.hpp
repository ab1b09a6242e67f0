// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <map>
#include <string>

namespace cnkit::net {

struct HttpResponse {
  int status = 0;  // 0: connection failed
  std::string body;
};

// POSTs a JSON body to an http:// or https:// URL.
HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers, std::chrono::milliseconds timeout);

}  // namespace cnkit::net
