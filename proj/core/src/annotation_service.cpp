// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/annotation_service.hpp"

#include <chrono>
#include <ctime>
#include <set>

#include <httplib.h>

namespace cnkit::humaneval {

namespace {

ServiceResponse error_response(int status, const std::string& kind, const std::string& message) {
  return {status, {{"error", kind}, {"message", message}}};
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    const auto slash = path.find('/', pos);
    const auto end = slash == std::string::npos ? path.size() : slash;
    if (end > pos) parts.push_back(path.substr(pos, end - pos));
    if (slash == std::string::npos) break;
    pos = slash + 1;
  }
  return parts;
}

std::size_t query_size(const ServiceRequest& req, const char* key, std::size_t fallback) {
  const auto it = req.query.find(key);
  if (it == req.query.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ValidationError(key, std::string("query parameter '") + key + "' must be a non-negative integer");
  }
}

nlohmann::json parse_body(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("body", "request body must be a JSON object");
  return j;
}

}  // namespace

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

AnnotationService::AnnotationService(AnnotationStore& store, std::vector<EvaluationItem> batch,
                                     std::vector<ApeComparison> comparisons, std::map<std::string, std::string> tokens,
                                     Clock clock)
    : store_(store),
      batch_(std::move(batch)),
      comparisons_(std::move(comparisons)),
      tokens_(std::move(tokens)),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp)) {
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    if (!item_index_.emplace(batch_[i].hs_id, i).second) throw ValidationError("batch", "duplicate item " + batch_[i].hs_id);
  }
  for (std::size_t i = 0; i < comparisons_.size(); ++i) {
    if (!comparison_index_.emplace(comparisons_[i].comparison_id, i).second) {
      throw ValidationError("comparisons", "duplicate comparison " + comparisons_[i].comparison_id);
    }
  }
}

ServiceResponse AnnotationService::handle(const ServiceRequest& req) const {
  constexpr std::string_view kBearer = "Bearer ";
  std::string token;
  if (req.authorization.rfind(kBearer, 0) == 0) token = req.authorization.substr(kBearer.size());
  const auto who = tokens_.find(token);
  if (token.empty() || who == tokens_.end()) return error_response(401, "unauthorized", "missing or unknown token");
  try {
    return dispatch(req, who->second);
  } catch (const BestConflict& e) {
    auto r = error_response(409, "constraint", e.what());
    r.body["conflict_cn_id"] = e.conflicting_cn_id();
    return r;
  } catch (const ConstraintError& e) {
    return error_response(409, "constraint", e.what());
  } catch (const ValidationError& e) {
    auto r = error_response(400, "validation", e.what());
    r.body["field"] = e.field();
    return r;
  }
}

ServiceResponse AnnotationService::dispatch(const ServiceRequest& req, const std::string& annotator) const {
  const auto parts = split_path(req.path);
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";
  if (parts.size() == 1 && parts[0] == "items" && get) return list_items(req, annotator);
  if (parts.size() == 1 && parts[0] == "progress" && get) return progress(annotator);
  if (parts.size() == 1 && parts[0] == "comparisons" && get) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& c : comparisons_) list.push_back(annotator_payload(c));
    return {200, {{"comparisons", list}, {"total", comparisons_.size()}}};
  }
  if (parts.size() >= 2 && parts[0] == "items") {
    const auto it = item_index_.find(parts[1]);
    if (it == item_index_.end()) return error_response(404, "not_found", "no item " + parts[1]);
    const auto& item = batch_[it->second];
    if (parts.size() == 2 && get) {
      auto payload = annotator_payload(item);
      payload["done"] = item_done(item, store_.annotations(), annotator);
      return {200, payload};
    }
    if (parts.size() == 3 && parts[2] == "annotation" && post) return post_annotation(item, req, annotator);
  }
  if (parts.size() >= 2 && parts[0] == "comparisons") {
    const auto it = comparison_index_.find(parts[1]);
    if (it == comparison_index_.end()) return error_response(404, "not_found", "no comparison " + parts[1]);
    const auto& c = comparisons_[it->second];
    if (parts.size() == 2 && get) return {200, annotator_payload(c)};
    if (parts.size() == 3 && parts[2] == "verdict" && post) return post_verdict(c, req, annotator);
  }
  return error_response(404, "not_found", req.method + " " + req.path);
}

bool AnnotationService::item_done(const EvaluationItem& item, const std::vector<AnnotationRecord>& current,
                                  const std::string& annotator) const {
  std::set<std::string> rated;
  for (const auto& r : current) {
    if (r.annotator_id == annotator && r.hs_id == item.hs_id) rated.insert(r.cn_id);
  }
  for (const auto& c : item.candidates) {
    if (!rated.count(c.cn_id)) return false;
  }
  return true;
}

ServiceResponse AnnotationService::list_items(const ServiceRequest& req, const std::string& annotator) const {
  const std::size_t offset = query_size(req, "offset", 0);
  const std::size_t limit = query_size(req, "limit", batch_.size());
  const auto current = store_.annotations();
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = offset; i < batch_.size() && i - offset < limit; ++i) {
    auto payload = annotator_payload(batch_[i]);
    payload["done"] = item_done(batch_[i], current, annotator);
    items.push_back(std::move(payload));
  }
  return {200, {{"items", items}, {"total", batch_.size()}, {"offset", offset}, {"limit", limit}}};
}

ServiceResponse AnnotationService::post_annotation(const EvaluationItem& item, const ServiceRequest& req,
                                                   const std::string& annotator) const {
  auto body = parse_body(req.body);
  body["annotator_id"] = annotator;
  body["hs_id"] = item.hs_id;
  if (!body.contains("timestamp")) body["timestamp"] = clock_();
  const auto record = annotation_from_json(body);
  bool known = false;
  for (const auto& c : item.candidates) known = known || c.cn_id == record.cn_id;
  if (!known) throw ValidationError("cn_id", "cn_id " + record.cn_id + " is not part of item " + item.hs_id);
  const Ack ack = store_.submit(record);
  return {200, {{"ok", true}, {"sequence", ack.sequence}, {"duplicate", ack.duplicate}}};
}

ServiceResponse AnnotationService::post_verdict(const ApeComparison& c, const ServiceRequest& req,
                                                const std::string& annotator) const {
  auto body = parse_body(req.body);
  body["annotator_id"] = annotator;
  body["comparison_id"] = c.comparison_id;
  if (!body.contains("timestamp")) body["timestamp"] = clock_();
  const Ack ack = store_.submit(verdict_from_json(body));
  return {200, {{"ok", true}, {"sequence", ack.sequence}, {"duplicate", ack.duplicate}}};
}

ServiceResponse AnnotationService::progress(const std::string& annotator) const {
  const auto current = store_.annotations();
  std::size_t done = 0;
  for (const auto& item : batch_) done += item_done(item, current, annotator) ? 1 : 0;
  std::size_t judged = 0;
  for (const auto& v : store_.verdicts()) {
    if (v.annotator_id == annotator && comparison_index_.count(v.comparison_id)) ++judged;
  }
  return {200,
          {{"annotator", annotator},
           {"items_total", batch_.size()},
           {"items_done", done},
           {"comparisons_total", comparisons_.size()},
           {"comparisons_done", judged}}};
}

// --- HTTP ----------------------------------------------------------------

struct AnnotationServer::Impl {
  httplib::Server server;
  const AnnotationService* service = nullptr;
};

AnnotationServer::AnnotationServer(const AnnotationService& service, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->service = &service;
  auto handler = [svc = &service](const httplib::Request& req, httplib::Response& res) {
    ServiceRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query.emplace(k, v);
    r.authorization = req.get_header_value("Authorization");
    r.body = req.body;
    const auto out = svc->handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  for (const char* pattern : {"/items", R"(/items/[^/]+)", "/progress", "/comparisons", R"(/comparisons/[^/]+)"}) {
    impl_->server.Get(pattern, handler);
  }
  impl_->server.Post(R"(/items/[^/]+/annotation)", handler);
  impl_->server.Post(R"(/comparisons/[^/]+/verdict)", handler);
  if (!static_dir.empty()) impl_->server.set_mount_point("/ui", static_dir.string());
  // httplib's default adds SO_REUSEPORT, which lets a second server share
  // a busy port instead of failing.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw PortInUseError("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw PortInUseError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  running_ = true;
  thread_ = std::thread([this] {
    impl_->server.listen_after_bind();
    running_ = false;
  });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::stop() {
  if (thread_.joinable()) {
    impl_->server.stop();
    thread_.join();
  }
  running_ = false;
}

}  // namespace cnkit::humaneval
