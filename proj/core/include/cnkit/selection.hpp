// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cnkit/metrics.hpp"

namespace cnkit::selection {

using metrics::MetricVector;

struct ScoredCandidate {
  std::string text;
  MetricVector metrics;
};

// The candidates one (model, decoding) pair produced for one HS.
struct CandidateCell {
  std::string hs_id;
  std::string model_id;
  std::string decoding_id;
  std::vector<ScoredCandidate> candidates;
};

nlohmann::json to_json(const CandidateCell& c);
CandidateCell cell_from_json(const nlohmann::json& j);

// Column order of the rank table: ROU, B-1, B-3, B-4.
inline constexpr std::size_t kRankedMetrics = 4;
std::array<double, kRankedMetrics> ranked_values(const MetricVector& m);

struct RankTable {
  std::vector<std::array<double, kRankedMetrics>> ranks;
  std::vector<double> mean_rank;
};

// Rank 1 is the highest score; tied scores share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& scores);

RankTable rank_candidates(const std::vector<MetricVector>& scored);

enum class GroupBy { Model, Decoding, ModelDecoding };

std::string_view to_string(GroupBy g);
GroupBy parse_group_by(std::string_view s);

struct Winner {
  std::string hs_id;
  std::string group;
  std::string model_id;
  std::string decoding_id;
  std::size_t candidate_index = 0;  // position within the pooled group
  std::string text;
  MetricVector metrics;
  double mean_rank = 0.0;
};

nlohmann::json to_json(const Winner& w);
Winner winner_from_json(const nlohmann::json& j);

// One winner per (hs, group). Candidates are pooled across every cell that
// maps to the group, ranked, and the minimum mean rank wins; ties go to the
// higher ROUGE-L, then higher BLEU-4, then the earlier candidate. Output
// follows first appearance of hs, then of group.
std::vector<Winner> select_best(const std::vector<CandidateCell>& pool, GroupBy group_by);

struct ReportRow {
  std::string group;
  std::size_t count = 0;
  MetricVector mean;
  metrics::DiversityReport diversity;
};

// Per-group overlap means plus RR over the winners' texts and NOV against
// the training CNs. Rows follow first appearance of each group.
std::vector<ReportRow> corpus_report(const std::vector<Winner>& winners, const std::vector<text::TokenSeq>& training,
                                     const metrics::RepetitionOptions& rr = {});

// Tab-separated layout: group, ROU, B-1, B-3, B-4, RR, NOV.
std::string report_tsv(const std::vector<ReportRow>& rows, std::string_view first_column = "group");

}  // namespace cnkit::selection
