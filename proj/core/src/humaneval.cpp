// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/humaneval.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <mutex>

#include <fcntl.h>
#include <unistd.h>

#include "cnkit/io.hpp"
#include "cnkit/rng.hpp"

namespace cnkit::humaneval {

namespace {

int likert_field(const nlohmann::json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw ValidationError(name, std::string("missing field '") + name + "'");
  if (!it->is_number_integer()) throw ValidationError(name, std::string("field '") + name + "' must be an integer");
  const auto v = it->get<long long>();
  if (v < 1 || v > 5) {
    throw ValidationError(name, std::string("field '") + name + "' must lie in 1..5, got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

bool binary_field(const nlohmann::json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw ValidationError(name, std::string("missing field '") + name + "'");
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number_integer()) {
    const auto v = it->get<long long>();
    if (v == 0 || v == 1) return v == 1;
  }
  throw ValidationError(name, std::string("field '") + name + "' must be 0 or 1");
}

std::string string_field(const nlohmann::json& j, const char* name, bool required = true) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) {
    if (required) throw ValidationError(name, std::string("missing field '") + name + "'");
    return {};
  }
  if (!it->is_string()) throw ValidationError(name, std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

void require_id(const std::string& v, const char* name) {
  if (v.empty()) throw ValidationError(name, std::string("field '") + name + "' must not be empty");
}

}  // namespace

void validate(const AnnotationRecord& r) {
  require_id(r.annotator_id, "annotator_id");
  require_id(r.hs_id, "hs_id");
  require_id(r.cn_id, "cn_id");
  for (auto [name, v] : {std::pair{"sui", r.sui}, std::pair{"spe", r.spe}, std::pair{"grm", r.grm}}) {
    if (v < 1 || v > 5) {
      throw ValidationError(name, std::string("field '") + name + "' must lie in 1..5, got " + std::to_string(v));
    }
  }
}

nlohmann::json to_json(const AnnotationRecord& r) {
  nlohmann::json j{{"annotator_id", r.annotator_id},
                   {"hs_id", r.hs_id},
                   {"cn_id", r.cn_id},
                   {"sui", r.sui},
                   {"spe", r.spe},
                   {"grm", r.grm},
                   {"cho", r.cho ? 1 : 0},
                   {"best", r.best ? 1 : 0},
                   {"timestamp", r.timestamp}};
  if (!r.idempotency_key.empty()) j["idempotency_key"] = r.idempotency_key;
  return j;
}

AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("annotation", "annotation must be a JSON object");
  AnnotationRecord r;
  r.annotator_id = string_field(j, "annotator_id");
  r.hs_id = string_field(j, "hs_id");
  r.cn_id = string_field(j, "cn_id");
  r.sui = likert_field(j, "sui");
  r.spe = likert_field(j, "spe");
  r.grm = likert_field(j, "grm");
  r.cho = binary_field(j, "cho");
  r.best = binary_field(j, "best");
  r.timestamp = string_field(j, "timestamp", false);
  r.idempotency_key = string_field(j, "idempotency_key", false);
  validate(r);
  return r;
}

nlohmann::json to_json(const EvaluationItem& item) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : item.candidates) {
    cands.push_back({{"cn_id", c.cn_id}, {"text", c.text}, {"model_id", c.model_id}, {"decoding_id", c.decoding_id}});
  }
  return {{"hs_id", item.hs_id}, {"hs", item.hs}, {"candidates", cands}, {"presentation_seed", item.presentation_seed}};
}

EvaluationItem item_from_json(const nlohmann::json& j) {
  EvaluationItem item;
  item.hs_id = j.at("hs_id").get<std::string>();
  item.hs = j.at("hs").get<std::string>();
  item.presentation_seed = j.value("presentation_seed", std::uint64_t{0});
  for (const auto& c : j.at("candidates")) {
    item.candidates.push_back({c.at("cn_id").get<std::string>(), c.at("text").get<std::string>(),
                               c.value("model_id", std::string{}), c.value("decoding_id", std::string{})});
  }
  return item;
}

nlohmann::json annotator_payload(const EvaluationItem& item) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : item.candidates) cands.push_back({{"cn_id", c.cn_id}, {"text", c.text}});
  return {{"id", item.hs_id}, {"hs", item.hs}, {"candidates", cands}};
}

std::vector<EvaluationItem> build_eval_batch(const std::vector<selection::Winner>& winners,
                                             const std::map<std::string, std::string>& hs_text,
                                             std::size_t sample_size, std::uint64_t seed) {
  if (sample_size == 0) throw ValidationError("sample_size", "sample size must be positive");
  std::vector<std::string> hs_order;
  std::map<std::string, std::vector<const selection::Winner*>> by_hs;
  for (const auto& w : winners) {
    auto [it, fresh] = by_hs.try_emplace(w.hs_id);
    if (fresh) hs_order.push_back(w.hs_id);
    for (const auto* other : it->second) {
      if (other->model_id == w.model_id) {
        throw ValidationError("winners", "hs " + w.hs_id + " has two winners for model " + w.model_id +
                                             "; expected Best_LM output");
      }
    }
    it->second.push_back(&w);
  }
  if (hs_order.size() < sample_size) {
    throw ConstraintError("winners cover " + std::to_string(hs_order.size()) + " distinct HS, fewer than the " +
                          std::to_string(sample_size) + " requested");
  }
  std::vector<std::size_t> idx(hs_order.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(sample_size);
  std::sort(idx.begin(), idx.end());

  std::vector<EvaluationItem> batch;
  batch.reserve(sample_size);
  for (std::size_t i : idx) {
    const std::string& hs_id = hs_order[i];
    const auto text = hs_text.find(hs_id);
    if (text == hs_text.end()) throw ValidationError("hs", "no HS text for " + hs_id);
    EvaluationItem item;
    item.hs_id = hs_id;
    item.hs = text->second;
    item.presentation_seed = derive_seed(seed, i);
    std::vector<const selection::Winner*> ws = by_hs[hs_id];
    Rng order(item.presentation_seed);
    order.shuffle(ws);
    for (std::size_t k = 0; k < ws.size(); ++k) {
      item.candidates.push_back({hs_id + "#" + std::to_string(k + 1), ws[k]->text, ws[k]->model_id, ws[k]->decoding_id});
    }
    batch.push_back(std::move(item));
  }
  return batch;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::First: return "first";
    case Verdict::Second: return "second";
    case Verdict::Tie: return "tie";
  }
  return "?";
}

Verdict parse_verdict(std::string_view s) {
  std::string v;
  for (char c : s) v += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (v == "first" || v == "a") return Verdict::First;
  if (v == "second" || v == "b") return Verdict::Second;
  if (v == "tie") return Verdict::Tie;
  throw ValidationError("verdict", "verdict must be first, second or tie; got '" + std::string(s) + "'");
}

bool ApeComparison::ape_first() const { return Rng(order_seed).below(2) == 1; }

nlohmann::json to_json(const ApeComparison& c) {
  return {{"comparison_id", c.comparison_id}, {"hs_id", c.hs_id}, {"hs", c.hs},
          {"cn_or", c.cn_or},                 {"cn_ape", c.cn_ape}, {"order_seed", c.order_seed}};
}

ApeComparison comparison_from_json(const nlohmann::json& j) {
  ApeComparison c;
  c.comparison_id = j.at("comparison_id").get<std::string>();
  c.hs_id = j.value("hs_id", c.comparison_id);
  c.hs = j.at("hs").get<std::string>();
  c.cn_or = j.at("cn_or").get<std::string>();
  c.cn_ape = j.at("cn_ape").get<std::string>();
  c.order_seed = j.at("order_seed").get<std::uint64_t>();
  return c;
}

nlohmann::json annotator_payload(const ApeComparison& c) {
  return {{"id", c.comparison_id}, {"hs", c.hs}, {"first", c.first()}, {"second", c.second()}};
}

std::vector<ApeComparison> build_ape_comparisons(const std::vector<ApeInput>& inputs, std::uint64_t seed) {
  std::vector<ApeComparison> out;
  out.reserve(inputs.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& in = inputs[i];
    require_id(in.id, "id");
    if (!seen.insert(in.id).second) throw ValidationError("id", "duplicate comparison id " + in.id);
    out.push_back({in.id, in.id, in.hs, in.cn_or, in.cn_ape, derive_seed(seed, i)});
  }
  return out;
}

nlohmann::json to_json(const VerdictRecord& v) {
  nlohmann::json j{{"annotator_id", v.annotator_id},
                   {"comparison_id", v.comparison_id},
                   {"verdict", std::string(to_string(v.verdict))},
                   {"timestamp", v.timestamp}};
  if (!v.idempotency_key.empty()) j["idempotency_key"] = v.idempotency_key;
  return j;
}

VerdictRecord verdict_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("verdict", "verdict must be a JSON object");
  VerdictRecord v;
  v.annotator_id = string_field(j, "annotator_id");
  v.comparison_id = string_field(j, "comparison_id");
  v.verdict = parse_verdict(string_field(j, "verdict"));
  v.timestamp = string_field(j, "timestamp", false);
  v.idempotency_key = string_field(j, "idempotency_key", false);
  require_id(v.annotator_id, "annotator_id");
  require_id(v.comparison_id, "comparison_id");
  return v;
}

// --- store ---------------------------------------------------------------

AnnotationStore::AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::string contents;
  if (std::filesystem::exists(path_)) contents = io::read_file(path_);

  std::size_t pos = 0;
  std::size_t good_end = 0;
  std::size_t lineno = 0;
  while (pos < contents.size()) {
    const auto nl = contents.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = contents.substr(pos, terminated ? nl - pos : std::string::npos);
    ++lineno;
    const std::size_t next = terminated ? nl + 1 : contents.size();
    const bool last = next >= contents.size();
    // A line without its newline was cut short by a crash mid-write.
    nlohmann::json entry =
        terminated ? nlohmann::json::parse(line, nullptr, false) : nlohmann::json(nlohmann::json::value_t::discarded);
    if (entry.is_discarded()) {
      if (last) {
        ++dropped_;
        break;
      }
      throw ValidationError("log", path_.string() + ":" + std::to_string(lineno) + ": corrupt log entry");
    }
    apply(entry);
    good_end = next;
    pos = next;
  }

  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open annotation log " + path_.string() + ": " + std::strerror(errno));
  if (good_end < contents.size() && ::ftruncate(fd_, static_cast<off_t>(good_end)) != 0) {
    throw Error("cannot trim torn entry from " + path_.string() + ": " + std::strerror(errno));
  }
}

AnnotationStore::~AnnotationStore() {
  if (fd_ >= 0) {
    ::fsync(fd_);
    ::close(fd_);
  }
}

void AnnotationStore::apply(const nlohmann::json& entry) {
  const auto kind = entry.at("kind").get<std::string>();
  if (kind == "annotation") {
    auto r = annotation_from_json(entry.at("record"));
    if (!r.idempotency_key.empty()) {
      idempotency_[r.annotator_id + '\x1f' + r.idempotency_key] = entry.at("seq").get<std::uint64_t>();
    }
    AnnotationKey key{r.annotator_id, r.hs_id, r.cn_id};
    annotations_[key] = std::move(r);
  } else if (kind == "verdict") {
    auto v = verdict_from_json(entry.at("record"));
    if (!v.idempotency_key.empty()) {
      idempotency_[v.annotator_id + '\x1f' + v.idempotency_key] = entry.at("seq").get<std::uint64_t>();
    }
    verdicts_[{v.annotator_id, v.comparison_id}] = std::move(v);
  } else {
    throw ValidationError("kind", "unknown log entry kind '" + kind + "'");
  }
  log_.push_back(entry);
}

Ack AnnotationStore::append(nlohmann::json entry) {
  entry["seq"] = log_.size();
  if (fd_ >= 0) {
    const std::string line = entry.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error("annotation log write failed: " + std::string(std::strerror(errno)));
      }
      off += static_cast<std::size_t>(n);
    }
  }
  const std::uint64_t seq = log_.size();
  apply(entry);
  return {seq, false};
}

Ack AnnotationStore::submit(const AnnotationRecord& record) {
  validate(record);
  std::unique_lock lock(mu_);
  if (!record.idempotency_key.empty()) {
    const auto it = idempotency_.find(record.annotator_id + '\x1f' + record.idempotency_key);
    if (it != idempotency_.end()) return {it->second, true};
  }
  if (record.best) {
    for (auto it = annotations_.lower_bound({record.annotator_id, record.hs_id, std::string{}});
         it != annotations_.end() && std::get<0>(it->first) == record.annotator_id &&
         std::get<1>(it->first) == record.hs_id;
         ++it) {
      if (it->second.best && it->second.cn_id != record.cn_id) {
        throw BestConflict(it->second.cn_id, "annotator " + record.annotator_id + " already marked cn_id " +
                                                 it->second.cn_id + " as best for hs " + record.hs_id +
                                                 "; retract it first");
      }
    }
  }
  return append({{"kind", "annotation"}, {"record", to_json(record)}});
}

Ack AnnotationStore::submit(const VerdictRecord& verdict) {
  require_id(verdict.annotator_id, "annotator_id");
  require_id(verdict.comparison_id, "comparison_id");
  std::unique_lock lock(mu_);
  if (!verdict.idempotency_key.empty()) {
    const auto it = idempotency_.find(verdict.annotator_id + '\x1f' + verdict.idempotency_key);
    if (it != idempotency_.end()) return {it->second, true};
  }
  return append({{"kind", "verdict"}, {"record", to_json(verdict)}});
}

std::vector<AnnotationRecord> AnnotationStore::annotations() const {
  std::shared_lock lock(mu_);
  std::vector<AnnotationRecord> out;
  out.reserve(annotations_.size());
  for (const auto& [k, r] : annotations_) out.push_back(r);
  return out;
}

std::vector<VerdictRecord> AnnotationStore::verdicts() const {
  std::shared_lock lock(mu_);
  std::vector<VerdictRecord> out;
  out.reserve(verdicts_.size());
  for (const auto& [k, v] : verdicts_) out.push_back(v);
  return out;
}

std::vector<nlohmann::json> AnnotationStore::log() const {
  std::shared_lock lock(mu_);
  return log_;
}

std::size_t AnnotationStore::log_size() const {
  std::shared_lock lock(mu_);
  return log_.size();
}

void AnnotationStore::flush() {
  std::unique_lock lock(mu_);
  if (fd_ >= 0) ::fsync(fd_);
}

// --- aggregation ---------------------------------------------------------

std::vector<HumanRow> aggregate_human(const std::vector<AnnotationRecord>& records,
                                      const std::vector<EvaluationItem>& batch, selection::GroupBy grouping) {
  if (records.empty()) throw ValidationError("records", "no annotations to aggregate");
  std::map<std::string, const ItemCandidate*> provenance;
  for (const auto& item : batch) {
    for (const auto& c : item.candidates) provenance[c.cn_id] = &c;
  }
  struct Acc {
    std::size_t n = 0;
    double sui = 0, spe = 0, grm = 0, cho = 0, best = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : records) {
    const auto it = provenance.find(r.cn_id);
    if (it == provenance.end()) throw ValidationError("cn_id", "annotation for unknown cn_id " + r.cn_id);
    const ItemCandidate& c = *it->second;
    std::string group;
    switch (grouping) {
      case selection::GroupBy::Model: group = c.model_id; break;
      case selection::GroupBy::Decoding: group = c.decoding_id; break;
      case selection::GroupBy::ModelDecoding: group = c.model_id + "+" + c.decoding_id; break;
    }
    auto& a = acc[group];
    ++a.n;
    a.sui += r.sui;
    a.spe += r.spe;
    a.grm += r.grm;
    a.cho += r.cho ? 1.0 : 0.0;
    a.best += r.best ? 1.0 : 0.0;
  }
  std::vector<HumanRow> rows;
  for (const auto& [g, a] : acc) {
    const double n = static_cast<double>(a.n);
    rows.push_back({g, a.n, a.sui / n, a.spe / n, a.grm / n, a.cho / n, a.best / n});
  }
  return rows;
}

std::string human_tsv(const std::vector<HumanRow>& rows, std::string_view first_column) {
  std::string out(first_column);
  out += "\tN\tSUI\tSPE\tGRM\tCHO\tBEST\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "\t%zu\t%.3f\t%.3f\t%.3f\t%.3f\t%.3f\n", r.records, r.sui, r.spe, r.grm, r.cho,
                  r.best);
    out += r.group;
    out += buf;
  }
  return out;
}

ApeTally ape_preference_tally(const std::vector<ApeComparison>& comparisons,
                              const std::vector<VerdictRecord>& verdicts, const std::set<std::string>& annotators) {
  if (comparisons.empty()) throw ValidationError("comparisons", "no comparisons to tally");
  std::map<std::string, const ApeComparison*> by_id;
  for (const auto& c : comparisons) by_id[c.comparison_id] = &c;
  std::map<std::pair<std::string, std::string>, Verdict> latest;
  std::set<std::string> who = annotators;
  for (const auto& v : verdicts) {
    if (!by_id.count(v.comparison_id)) {
      throw ValidationError("comparison_id", "verdict for unknown comparison " + v.comparison_id);
    }
    latest[{v.annotator_id, v.comparison_id}] = v.verdict;
    if (annotators.empty()) who.insert(v.annotator_id);
  }
  if (who.empty()) throw ConstraintError("no verdicts recorded");

  std::vector<std::string> missing;
  for (const auto& a : who) {
    for (const auto& c : comparisons) {
      if (!latest.count({a, c.comparison_id})) missing.push_back(a + ":" + c.comparison_id);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " verdicts missing:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw ConstraintError(msg);
  }

  ApeTally t;
  const double n = static_cast<double>(comparisons.size());
  for (const auto& a : who) {
    std::size_t ape = 0, orig = 0, tie = 0;
    for (const auto& c : comparisons) {
      const Verdict v = latest.at({a, c.comparison_id});
      if (v == Verdict::Tie) {
        ++tie;
      } else if ((v == Verdict::First) == c.ape_first()) {
        ++ape;
      } else {
        ++orig;
      }
    }
    t.per_annotator[a] = {100.0 * static_cast<double>(ape) / n, 100.0 * static_cast<double>(orig) / n,
                          100.0 * static_cast<double>(tie) / n};
  }
  for (const auto& [a, p] : t.per_annotator) {
    t.mean.prefer_ape += p.prefer_ape;
    t.mean.prefer_original += p.prefer_original;
    t.mean.tie += p.tie;
  }
  const double k = static_cast<double>(t.per_annotator.size());
  t.mean.prefer_ape /= k;
  t.mean.prefer_original /= k;
  t.mean.tie /= k;
  return t;
}

std::string tally_tsv(const ApeTally& t) {
  std::string out = "annotator\tprefer_ape\tprefer_original\ttie\n";
  char buf[96];
  for (const auto& [a, p] : t.per_annotator) {
    std::snprintf(buf, sizeof buf, "\t%.2f\t%.2f\t%.2f\n", p.prefer_ape, p.prefer_original, p.tie);
    out += a;
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "mean\t%.2f\t%.2f\t%.2f\n", t.mean.prefer_ape, t.mean.prefer_original, t.mean.tie);
  out += buf;
  return out;
}

}  // namespace cnkit::humaneval
