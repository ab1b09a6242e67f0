// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/selection.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "cnkit/error.hpp"

namespace cnkit::selection {

nlohmann::json to_json(const CandidateCell& c) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& s : c.candidates) cands.push_back({{"text", s.text}, {"metrics", metrics::to_json(s.metrics)}});
  return {{"hs_id", c.hs_id}, {"model_id", c.model_id}, {"decoding_id", c.decoding_id}, {"candidates", cands}};
}

CandidateCell cell_from_json(const nlohmann::json& j) {
  CandidateCell c;
  c.hs_id = j.at("hs_id").get<std::string>();
  c.model_id = j.at("model_id").get<std::string>();
  c.decoding_id = j.at("decoding_id").get<std::string>();
  for (const auto& s : j.at("candidates")) {
    ScoredCandidate sc;
    sc.text = s.at("text").get<std::string>();
    if (auto m = s.find("metrics"); m != s.end()) sc.metrics = metrics::metric_vector_from_json(*m);
    c.candidates.push_back(std::move(sc));
  }
  return c;
}

std::array<double, kRankedMetrics> ranked_values(const MetricVector& m) {
  return {m.rouge_l, m.bleu1, m.bleu3, m.bleu4};
}

std::vector<double> average_ranks(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> ranks(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // positions i..j (0-based) share rank mean((i+1)..(j+1))
    const double shared = static_cast<double>(i + j + 2) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

RankTable rank_candidates(const std::vector<MetricVector>& scored) {
  if (scored.empty()) throw ValidationError("candidates", "nothing to rank");
  RankTable t;
  t.ranks.resize(scored.size());
  t.mean_rank.assign(scored.size(), 0.0);
  for (std::size_t m = 0; m < kRankedMetrics; ++m) {
    std::vector<double> column;
    column.reserve(scored.size());
    for (const auto& v : scored) column.push_back(ranked_values(v)[m]);
    const auto r = average_ranks(column);
    for (std::size_t i = 0; i < scored.size(); ++i) t.ranks[i][m] = r[i];
  }
  for (std::size_t i = 0; i < scored.size(); ++i) {
    double sum = 0.0;
    for (double r : t.ranks[i]) sum += r;
    t.mean_rank[i] = sum / static_cast<double>(kRankedMetrics);
  }
  return t;
}

std::string_view to_string(GroupBy g) {
  switch (g) {
    case GroupBy::Model: return "model";
    case GroupBy::Decoding: return "decoding";
    case GroupBy::ModelDecoding: return "model-decoding";
  }
  return "?";
}

GroupBy parse_group_by(std::string_view s) {
  if (s == "model" || s == "lm") return GroupBy::Model;
  if (s == "decoding" || s == "d") return GroupBy::Decoding;
  if (s == "model-decoding" || s == "model+decoding" || s == "model_decoding" || s == "lm+d" || s == "both") {
    return GroupBy::ModelDecoding;
  }
  throw ValidationError("group", "unknown grouping '" + std::string(s) + "'");
}

nlohmann::json to_json(const Winner& w) {
  return {{"hs_id", w.hs_id},
          {"group", w.group},
          {"model_id", w.model_id},
          {"decoding_id", w.decoding_id},
          {"candidate_index", w.candidate_index},
          {"text", w.text},
          {"metrics", metrics::to_json(w.metrics)},
          {"mean_rank", w.mean_rank}};
}

Winner winner_from_json(const nlohmann::json& j) {
  Winner w;
  w.hs_id = j.at("hs_id").get<std::string>();
  w.group = j.at("group").get<std::string>();
  w.model_id = j.at("model_id").get<std::string>();
  w.decoding_id = j.at("decoding_id").get<std::string>();
  w.candidate_index = j.at("candidate_index").get<std::size_t>();
  w.text = j.at("text").get<std::string>();
  w.metrics = metrics::metric_vector_from_json(j.at("metrics"));
  w.mean_rank = j.at("mean_rank").get<double>();
  return w;
}

namespace {

std::string group_key(const CandidateCell& c, GroupBy g) {
  switch (g) {
    case GroupBy::Model: return c.model_id;
    case GroupBy::Decoding: return c.decoding_id;
    case GroupBy::ModelDecoding: return c.model_id + "+" + c.decoding_id;
  }
  return {};
}

struct PoolEntry {
  const CandidateCell* cell;
  std::size_t index;
};

}  // namespace

std::vector<Winner> select_best(const std::vector<CandidateCell>& pool, GroupBy group_by) {
  if (pool.empty()) throw ValidationError("pool", "empty candidate pool");
  std::vector<std::pair<std::string, std::string>> keys;  // (hs, group) in first-appearance order
  std::map<std::pair<std::string, std::string>, std::vector<PoolEntry>> groups;
  for (const auto& cell : pool) {
    if (cell.candidates.empty()) {
      throw ValidationError("candidates", "cell " + cell.hs_id + "/" + cell.model_id + "/" + cell.decoding_id +
                                              " has no candidates");
    }
    auto key = std::make_pair(cell.hs_id, group_key(cell, group_by));
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) keys.push_back(key);
    for (std::size_t i = 0; i < cell.candidates.size(); ++i) it->second.push_back({&cell, i});
  }
  // Keep hs order by first appearance, groups within an hs likewise.
  std::map<std::string, std::size_t> hs_rank;
  for (const auto& k : keys) hs_rank.try_emplace(k.first, hs_rank.size());
  std::stable_sort(keys.begin(), keys.end(),
                   [&](const auto& a, const auto& b) { return hs_rank[a.first] < hs_rank[b.first]; });

  std::vector<Winner> out;
  out.reserve(keys.size());
  for (const auto& key : keys) {
    const auto& entries = groups[key];
    std::vector<MetricVector> scored;
    scored.reserve(entries.size());
    for (const auto& e : entries) scored.push_back(e.cell->candidates[e.index].metrics);
    const auto table = rank_candidates(scored);
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i) {
      const auto& a = scored[i];
      const auto& b = scored[best];
      if (table.mean_rank[i] != table.mean_rank[best]) {
        if (table.mean_rank[i] < table.mean_rank[best]) best = i;
      } else if (a.rouge_l != b.rouge_l) {
        if (a.rouge_l > b.rouge_l) best = i;
      } else if (a.bleu4 > b.bleu4) {
        best = i;
      }
    }
    const auto& e = entries[best];
    Winner w;
    w.hs_id = key.first;
    w.group = key.second;
    w.model_id = e.cell->model_id;
    w.decoding_id = e.cell->decoding_id;
    w.candidate_index = best;
    w.text = e.cell->candidates[e.index].text;
    w.metrics = scored[best];
    w.mean_rank = table.mean_rank[best];
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<ReportRow> corpus_report(const std::vector<Winner>& winners, const std::vector<text::TokenSeq>& training,
                                     const metrics::RepetitionOptions& rr) {
  if (winners.empty()) throw ValidationError("winners", "no winners to report on");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const Winner*>> by_group;
  for (const auto& w : winners) {
    auto [it, fresh] = by_group.try_emplace(w.group);
    if (fresh) order.push_back(w.group);
    it->second.push_back(&w);
  }
  std::vector<ReportRow> rows;
  for (const auto& g : order) {
    const auto& ws = by_group[g];
    ReportRow row;
    row.group = g;
    row.count = ws.size();
    std::vector<text::TokenSeq> texts;
    for (const Winner* w : ws) {
      row.mean.rouge_l += w->metrics.rouge_l;
      row.mean.bleu1 += w->metrics.bleu1;
      row.mean.bleu3 += w->metrics.bleu3;
      row.mean.bleu4 += w->metrics.bleu4;
      texts.push_back(text::tokenize(w->text));
    }
    const double n = static_cast<double>(ws.size());
    row.mean.rouge_l /= n;
    row.mean.bleu1 /= n;
    row.mean.bleu3 /= n;
    row.mean.bleu4 /= n;
    row.diversity.window = rr.window;
    bool any_token = false;
    for (const auto& t : texts) any_token = any_token || !t.empty();
    row.diversity.rr = any_token ? metrics::repetition_rate(texts, rr) : 0.0;
    row.diversity.nov = training.empty() ? 0.0 : metrics::novelty(texts, training);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string report_tsv(const std::vector<ReportRow>& rows, std::string_view first_column) {
  std::string out(first_column);
  out += "\tROU\tB-1\tB-3\tB-4\tRR\tNOV\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "\t%.4f\t%.4f\t%.4f\t%.4f\t%.3f\t%.3f\n", r.mean.rouge_l, r.mean.bleu1,
                  r.mean.bleu3, r.mean.bleu4, r.diversity.rr, r.diversity.nov);
    out += r.group;
    out += buf;
  }
  return out;
}

}  // namespace cnkit::selection
