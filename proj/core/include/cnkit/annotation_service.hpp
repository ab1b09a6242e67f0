// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cnkit/error.hpp"
#include "cnkit/humaneval.hpp"

namespace cnkit::humaneval {

struct ServiceRequest {
  std::string method;  // GET / POST
  std::string path;    // without the query string
  std::map<std::string, std::string> query;
  std::string authorization;  // raw Authorization header
  std::string body;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

// Routes:
//   GET  /items                      queue for the caller (?offset=&limit=)
//   GET  /items/{id}
//   POST /items/{id}/annotation
//   GET  /comparisons
//   GET  /comparisons/{id}
//   POST /comparisons/{id}/verdict
//   GET  /progress
// Errors carry {"error": kind, "message": ...}; validation errors add
// "field", best-choice conflicts add "conflict_cn_id".
class AnnotationService {
 public:
  using Clock = std::function<std::string()>;

  // `tokens` maps bearer token to annotator id.
  AnnotationService(AnnotationStore& store, std::vector<EvaluationItem> batch, std::vector<ApeComparison> comparisons,
                    std::map<std::string, std::string> tokens, Clock clock = {});

  ServiceResponse handle(const ServiceRequest& req) const;

  const std::vector<EvaluationItem>& batch() const { return batch_; }

 private:
  ServiceResponse dispatch(const ServiceRequest& req, const std::string& annotator) const;
  ServiceResponse list_items(const ServiceRequest& req, const std::string& annotator) const;
  ServiceResponse post_annotation(const EvaluationItem& item, const ServiceRequest& req,
                                  const std::string& annotator) const;
  ServiceResponse post_verdict(const ApeComparison& c, const ServiceRequest& req, const std::string& annotator) const;
  ServiceResponse progress(const std::string& annotator) const;
  bool item_done(const EvaluationItem& item, const std::vector<AnnotationRecord>& current,
                 const std::string& annotator) const;

  AnnotationStore& store_;
  std::vector<EvaluationItem> batch_;
  std::vector<ApeComparison> comparisons_;
  std::map<std::string, std::size_t> item_index_;
  std::map<std::string, std::size_t> comparison_index_;
  std::map<std::string, std::string> tokens_;
  Clock clock_;
};

std::string utc_timestamp();

class PortInUseError : public Error {
 public:
  using Error::Error;
};

// HTTP front end. start() binds synchronously (PortInUseError when the
// address is taken) and serves on a background thread.
class AnnotationServer {
 public:
  AnnotationServer(const AnnotationService& service, std::filesystem::path static_dir = {});
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // port 0 picks a free port; returns the bound port.
  int start(const std::string& host, int port);
  void stop();
  bool running() const { return running_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<bool> running_{false};
};

}  // namespace cnkit::humaneval
