// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cnkit/corpus.hpp"
#include "cnkit/decoding.hpp"
#include "cnkit/langmodel.hpp"
#include "cnkit/metrics.hpp"
#include "cnkit/selection.hpp"

namespace cnkit::experiments {

using corpus::DatasetRecord;
using corpus::TargetLabel;
using text::TokenSeq;

// Sample Pearson coefficient. Throws on length mismatch, fewer than two
// points, or a zero-variance input.
double pearson(std::span<const double> x, std::span<const double> y);

// Training CNs grouped by target for one left-out configuration, plus the
// left-out test references.
struct LotoFold {
  TargetLabel left_out = TargetLabel::Jews;
  std::map<TargetLabel, std::vector<TokenSeq>> train_subsets;
  std::vector<TokenSeq> test_references;
};

// Subset T holds the train records that carry T (multi-target records land
// in every subset they carry).
LotoFold make_fold(const corpus::LotoSplit& split, TargetLabel left_out, std::span<const TargetLabel> subset_targets);

struct InfluenceMatrix {
  std::vector<TargetLabel> rows;     // training subsets
  std::vector<TargetLabel> columns;  // left-out test targets
  std::vector<std::vector<std::optional<double>>> values;  // [row][column]; diagonal absent

  std::optional<double> at(TargetLabel row, TargetLabel column) const;
  // Row with the lowest novelty for `column`; ties go to the earlier row.
  TargetLabel most_influential(TargetLabel column) const;
};

// Every fold must hold a non-empty subset for every row other than its own
// left-out target.
InfluenceMatrix influence_matrix(const std::vector<LotoFold>& folds, std::span<const TargetLabel> rows);

std::string influence_tsv(const InfluenceMatrix& m);

enum class CorrelationPoints { PerTarget, PerCn };

struct NamedDecoding {
  std::string id;
  decoding::DecodingConfig config;
};

struct LotoRunConfig {
  std::vector<TargetLabel> targets{corpus::kLotoTargets.begin(), corpus::kLotoTargets.end()};
  corpus::LotoConfig loto;
  std::vector<NamedDecoding> decodings;  // the first entry drives the overlap table
  std::size_t candidates = 5;
  std::size_t max_test_items = 0;  // 0 keeps every test HS
  metrics::RepetitionOptions rr;
  CorrelationPoints points = CorrelationPoints::PerTarget;
  bool parallel = true;

  // Top-k (k=40) and beam search (5 beams, penalty 2) with seed `seed`.
  static std::vector<NamedDecoding> default_decodings(std::uint64_t seed);
};

using ProviderFactory =
    std::function<std::shared_ptr<const lm::LanguageModel>(const std::vector<DatasetRecord>& train)>;

// Trains an n-gram model on "HS <hs> CN <cn>" sequences of the train set.
ProviderFactory ngram_factory(std::size_t order = 3);

struct DecodingOutcome {
  std::string decoding_id;
  std::vector<selection::Winner> winners;  // one per test HS
  selection::ReportRow row;                // overlap means, RR, NOV vs train
};

struct TargetOutcome {
  TargetLabel target = TargetLabel::Jews;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<DecodingOutcome> decodings;
  double reference_rr = 0.0;
  TargetLabel most_influential = TargetLabel::Jews;
  double reference_nov_full = 0.0;         // vs the whole training set
  double reference_nov_influential = 0.0;  // vs the most influential subset only
  double reference_nov_without = 0.0;      // vs training minus that subset
  std::vector<double> per_cn_nov_influential;
  std::vector<double> per_cn_nov_without;
};

struct CorrelationEntry {
  std::string metric;
  double r_with_influential = 0.0;
  double r_without_influential = 0.0;
};

struct CorrelationReport {
  CorrelationPoints points = CorrelationPoints::PerTarget;
  std::vector<CorrelationEntry> overlap;
  double mean_r_with = 0.0;
  double mean_r_without = 0.0;
  // Reference novelty vs candidate novelty, one r per decoding.
  std::vector<std::pair<std::string, double>> novelty_by_decoding;
};

// Per overlap metric, correlates x = reference novelty (against the most
// influential subset, then against training without it) with y = overlap.
// Entries whose correlation is undefined are left out; throws if none is
// defined.
CorrelationReport correlate(std::span<const double> nov_influential, std::span<const double> nov_without,
                            std::span<const metrics::MetricVector> overlap);

nlohmann::json to_json(const CorrelationReport& r);

struct LotoReport {
  std::vector<TargetOutcome> targets;
  InfluenceMatrix influence;
  CorrelationReport correlations;
};

// Correlations that are undefined (constant overlap) are left empty.
LotoReport loto_run(const std::vector<DatasetRecord>& dataset, const ProviderFactory& factory,
                    const LotoRunConfig& config);

// Rows per target: ROU, B-1, B-3, B-4, RR, NOV of the first decoding.
std::string overlap_tsv(const LotoReport& r);
// Rows per target: RR of candidates per decoding and of the references.
std::string repetition_tsv(const LotoReport& r);
// x,y pairs behind the correlation plots, one line per point.
std::string scatter_csv(const LotoReport& r);

}  // namespace cnkit::experiments
