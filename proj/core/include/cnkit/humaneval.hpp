// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "cnkit/error.hpp"
#include "cnkit/selection.hpp"

namespace cnkit::humaneval {

struct AnnotationRecord {
  std::string annotator_id;
  std::string hs_id;
  std::string cn_id;
  int sui = 0;  // suitableness, 1..5
  int spe = 0;  // specificity, 1..5
  int grm = 0;  // grammaticality, 1..5
  bool cho = false;
  bool best = false;
  std::string timestamp;
  std::string idempotency_key;
};

void validate(const AnnotationRecord& r);
nlohmann::json to_json(const AnnotationRecord& r);
// Likert fields must be integers; cho/best accept booleans or 0/1.
AnnotationRecord annotation_from_json(const nlohmann::json& j);

// Raised when an annotator marks a second CN of the same HS as best.
class BestConflict : public ConstraintError {
 public:
  BestConflict(std::string conflicting_cn_id, const std::string& what)
      : ConstraintError(what), cn_id_(std::move(conflicting_cn_id)) {}
  const std::string& conflicting_cn_id() const noexcept { return cn_id_; }

 private:
  std::string cn_id_;
};

struct ItemCandidate {
  std::string cn_id;
  std::string text;
  std::string model_id;     // provenance, never sent to annotators
  std::string decoding_id;  // provenance, never sent to annotators
};

struct EvaluationItem {
  std::string hs_id;
  std::string hs;
  std::vector<ItemCandidate> candidates;  // already in presentation order
  std::uint64_t presentation_seed = 0;
};

nlohmann::json to_json(const EvaluationItem& item);
EvaluationItem item_from_json(const nlohmann::json& j);
// Annotator-facing view: ids and texts only.
nlohmann::json annotator_payload(const EvaluationItem& item);

// Samples `sample_size` HS from Best_LM winners and lays out one CN per
// model, shuffled per item. Throws ConstraintError when the winners cover
// fewer distinct HS than requested.
std::vector<EvaluationItem> build_eval_batch(const std::vector<selection::Winner>& winners,
                                             const std::map<std::string, std::string>& hs_text,
                                             std::size_t sample_size = 200, std::uint64_t seed = 0);

enum class Verdict { First, Second, Tie };
std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

struct ApeComparison {
  std::string comparison_id;
  std::string hs_id;
  std::string hs;
  std::string cn_or;
  std::string cn_ape;
  std::uint64_t order_seed = 0;

  // Presentation order is a pure function of order_seed.
  bool ape_first() const;
  const std::string& first() const { return ape_first() ? cn_ape : cn_or; }
  const std::string& second() const { return ape_first() ? cn_or : cn_ape; }
};

nlohmann::json to_json(const ApeComparison& c);
ApeComparison comparison_from_json(const nlohmann::json& j);
nlohmann::json annotator_payload(const ApeComparison& c);

struct ApeInput {
  std::string id;
  std::string hs;
  std::string cn_or;
  std::string cn_ape;
};

std::vector<ApeComparison> build_ape_comparisons(const std::vector<ApeInput>& inputs, std::uint64_t seed);

struct VerdictRecord {
  std::string annotator_id;
  std::string comparison_id;
  Verdict verdict = Verdict::Tie;
  std::string timestamp;
  std::string idempotency_key;
};

nlohmann::json to_json(const VerdictRecord& v);
VerdictRecord verdict_from_json(const nlohmann::json& j);

struct Ack {
  std::uint64_t sequence = 0;  // position in the log
  bool duplicate = false;      // idempotent replay, nothing written
};

using AnnotationKey = std::tuple<std::string, std::string, std::string>;  // annotator, hs, cn

// Append-only JSON Lines log with a current-state view. Each entry is
// written with one write(2) on an O_APPEND descriptor; on open, a torn
// final line is dropped and trimmed from the file. An empty path keeps the
// log in memory.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path = {});
  ~AnnotationStore();
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  Ack submit(const AnnotationRecord& record);
  Ack submit(const VerdictRecord& verdict);

  std::vector<AnnotationRecord> annotations() const;  // current state, sorted by key
  std::vector<VerdictRecord> verdicts() const;        // current state, sorted by (annotator, comparison)
  std::vector<nlohmann::json> log() const;
  std::size_t log_size() const;
  std::size_t dropped_torn_lines() const { return dropped_; }

  void flush();

 private:
  Ack append(nlohmann::json entry);
  void apply(const nlohmann::json& entry);

  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::shared_mutex mu_;
  std::vector<nlohmann::json> log_;
  std::map<AnnotationKey, AnnotationRecord> annotations_;
  std::map<std::pair<std::string, std::string>, VerdictRecord> verdicts_;
  std::map<std::string, std::uint64_t> idempotency_;
  std::size_t dropped_ = 0;
};

struct HumanRow {
  std::string group;
  std::size_t records = 0;
  double sui = 0.0;
  double spe = 0.0;
  double grm = 0.0;
  double cho = 0.0;   // selection rate
  double best = 0.0;  // selection rate
};

// Groups current records through the batch provenance; rows follow the
// sorted group names.
std::vector<HumanRow> aggregate_human(const std::vector<AnnotationRecord>& records,
                                      const std::vector<EvaluationItem>& batch, selection::GroupBy grouping);

std::string human_tsv(const std::vector<HumanRow>& rows, std::string_view first_column = "group");

struct Preference {
  double prefer_ape = 0.0;
  double prefer_original = 0.0;
  double tie = 0.0;
};

struct ApeTally {
  std::map<std::string, Preference> per_annotator;
  Preference mean;
};

// Percentages per annotator over the comparisons, then averaged across
// annotators. Every annotator in `annotators` (or, if empty, every one with
// a verdict) must have judged every comparison.
ApeTally ape_preference_tally(const std::vector<ApeComparison>& comparisons,
                              const std::vector<VerdictRecord>& verdicts,
                              const std::set<std::string>& annotators = {});

std::string tally_tsv(const ApeTally& t);

}  // namespace cnkit::humaneval
