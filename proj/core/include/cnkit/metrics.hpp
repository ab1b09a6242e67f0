// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cnkit/textkit.hpp"

namespace cnkit::metrics {

using text::TokenSeq;

// Overlap scores of one candidate against its gold reference.
struct MetricVector {
  double rouge_l = 0.0;
  double bleu1 = 0.0;
  double bleu3 = 0.0;
  double bleu4 = 0.0;

  bool operator==(const MetricVector&) const = default;
};

nlohmann::json to_json(const MetricVector& m);
MetricVector metric_vector_from_json(const nlohmann::json& j);

// Sentence-level BLEU over orders 1..n with uniform weights. Orders >= 2 use
// add-one smoothing on matches and totals; the brevity penalty applies when
// the candidate is shorter than the reference.
double bleu_n(const TokenSeq& candidate, const TokenSeq& reference, int n);

// LCS-based F1. Both sides must be non-empty.
double rouge_l(const TokenSeq& candidate, const TokenSeq& reference);

struct RepetitionOptions {
  std::size_t window = 1000;
  // When set, whole sentences are shuffled with this seed before windowing.
  std::optional<std::uint64_t> shuffle_seed;
};

struct DiversityReport {
  double rr = 0.0;
  double nov = 0.0;
  std::size_t window = 1000;
};

// Per-window, per-order fraction of n-gram types occurring more than once.
// Exposed for diagnostics and tests; index 0 is unigrams.
std::vector<std::array<double, 4>> repetition_fractions(const std::vector<TokenSeq>& corpus,
                                                        const RepetitionOptions& opts = {});

// Corpus repetition rate as a percentage: 100 x geometric mean over n = 1..4
// of the window-averaged non-singleton type fractions.
double repetition_rate(const std::vector<TokenSeq>& corpus, const RepetitionOptions& opts = {});

double jaccard(const TokenSeq& a, const TokenSeq& b);

// Mean over generated items of 1 - max Jaccard against any training item.
double novelty(const std::vector<TokenSeq>& generated, const std::vector<TokenSeq>& training);

// Per-item novelty values, in input order.
std::vector<double> novelty_per_item(const std::vector<TokenSeq>& generated, const std::vector<TokenSeq>& training);

struct DependencyTree {
  // heads[i] is the 1-based head of token i+1; 0 marks the root.
  std::vector<std::size_t> heads;
};

struct ParsedCn {
  std::vector<DependencyTree> sentences;
};

// Reads the ID and HEAD columns of CoNLL-U. Multiword ranges and empty nodes
// are skipped; sentences are separated by blank lines.
ParsedCn parse_conllu(std::string_view conllu);

struct ConlluDocument {
  std::string id;
  ParsedCn parsed;
};

// Splits on "# newdoc id = ..." comments; input without them is one
// document with an empty id.
std::vector<ConlluDocument> parse_conllu_documents(std::string_view conllu);

struct SyntacticReport {
  std::size_t msd = 0;
  double asd = 0.0;
  std::size_t nst = 0;
};

SyntacticReport syntactic_metrics(const ParsedCn& parsed);

std::vector<MetricVector> score_candidates(const std::vector<std::string>& candidates, std::string_view reference);
MetricVector score_candidate(const TokenSeq& candidate, const TokenSeq& reference);

}  // namespace cnkit::metrics
