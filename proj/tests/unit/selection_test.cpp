// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "cnkit/error.hpp"
#include "cnkit/rng.hpp"
#include "cnkit/selection.hpp"
#include "selection_oracles.hpp"

using namespace cnkit;
using namespace cnkit::selection;

namespace {

MetricVector mv(double rou, double b1, double b3, double b4) { return {rou, b1, b3, b4}; }

}  // namespace

TEST_CASE("average_ranks shares tied positions") {
  CHECK(average_ranks({0.9}) == std::vector<double>{1.0});
  CHECK(average_ranks({0.1, 0.5, 0.5}) == std::vector<double>{3.0, 1.5, 1.5});
  CHECK(average_ranks({0.3, 0.3, 0.3, 0.3}) == std::vector<double>{2.5, 2.5, 2.5, 2.5});
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(1 + rng.below(9));
    for (auto& x : v) x = static_cast<double>(rng.below(4));
    CHECK(average_ranks(v) == oracle::ranks(v));
  }
}

TEST_CASE("rank table examples") {
  const auto one = rank_candidates({mv(0.2, 0.3, 0.1, 0.0)});
  CHECK(one.mean_rank == std::vector<double>{1.0});

  const auto two = rank_candidates({mv(0.1, 0.1, 0.1, 0.1), mv(0.5, 0.5, 0.5, 0.5)});
  CHECK(two.mean_rank == std::vector<double>{2.0, 1.0});

  // B-1 tie between the first two
  const auto three = rank_candidates({mv(0.5, 0.4, 0.3, 0.2), mv(0.4, 0.4, 0.2, 0.1), mv(0.3, 0.2, 0.1, 0.3)});
  CHECK(three.ranks[0] == std::array<double, 4>{1, 1.5, 1, 2});
  CHECK(three.ranks[1] == std::array<double, 4>{2, 1.5, 2, 3});
  CHECK(three.ranks[2] == std::array<double, 4>{3, 3, 3, 1});
  CHECK(three.mean_rank[0] == doctest::Approx(1.375));
  CHECK(three.mean_rank[2] == doctest::Approx(2.5));
  CHECK_THROWS_AS(rank_candidates({}), ValidationError);
}

TEST_CASE("single cell winner is the minimum mean rank") {
  CandidateCell cell{"h1", "m", "d", {}};
  const std::vector<MetricVector> ms{mv(0.1, 0.2, 0.1, 0.1), mv(0.4, 0.5, 0.3, 0.2), mv(0.3, 0.6, 0.2, 0.1),
                                     mv(0.0, 0.1, 0.0, 0.0), mv(0.35, 0.4, 0.3, 0.3)};
  for (std::size_t i = 0; i < ms.size(); ++i) cell.candidates.push_back({"c" + std::to_string(i), ms[i]});
  const auto w = select_best({cell}, GroupBy::ModelDecoding);
  REQUIRE(w.size() == 1);
  const auto table = rank_candidates(ms);
  const auto best = std::min_element(table.mean_rank.begin(), table.mean_rank.end()) - table.mean_rank.begin();
  CHECK(w[0].candidate_index == static_cast<std::size_t>(best));
  CHECK(w[0].text == "c" + std::to_string(best));
  CHECK(w[0].mean_rank == table.mean_rank[static_cast<std::size_t>(best)]);
}

TEST_CASE("mean rank ties fall to ROUGE-L, BLEU-4, then position") {
  // A wins ROU and B-1, B wins B-3 and B-4: equal mean ranks
  CandidateCell cell{"h", "m", "d", {{"a", mv(0.5, 0.5, 0.1, 0.1)}, {"b", mv(0.1, 0.1, 0.5, 0.5)}}};
  CHECK(select_best({cell}, GroupBy::Model)[0].text == "a");
  CandidateCell same{"h", "m", "d", {{"x", mv(0.3, 0.3, 0.3, 0.3)}, {"y", mv(0.3, 0.3, 0.3, 0.3)}}};
  CHECK(select_best({same}, GroupBy::Model)[0].text == "x");
  CHECK_THROWS_AS(select_best({}, GroupBy::Model), ValidationError);
}

TEST_CASE("dominant candidate wins its model group") {
  std::vector<CandidateCell> pool;
  pool.push_back({"h", "gpt2", "topk", {{"x", mv(0.9, 0.9, 0.9, 0.9)}, {"p", mv(0.2, 0.3, 0.1, 0.1)}}});
  pool.push_back({"h", "gpt2", "bs", {{"q", mv(0.5, 0.5, 0.5, 0.5)}, {"r", mv(0.4, 0.6, 0.2, 0.1)}}});
  pool.push_back({"h", "t5", "topk", {{"s", mv(0.3, 0.3, 0.3, 0.3)}}});
  const auto w = select_best(pool, GroupBy::Model);
  REQUIRE(w.size() == 2);
  CHECK(w[0].group == "gpt2");
  CHECK(w[0].text == "x");
  CHECK(w[0].decoding_id == "topk");
  CHECK(w[1].group == "t5");
}

TEST_CASE("every grouping matches the exhaustive oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pool = oracle::random_pool(rng, 2, 2, 2, 2, 3);
    for (auto g : {GroupBy::Model, GroupBy::Decoding, GroupBy::ModelDecoding}) {
      const auto check = oracle::check_grouping(pool, g);
      CHECK(check.groups == (g == GroupBy::ModelDecoding ? 8 : 4));
      CHECK(check.mismatches == 0);
    }
  }
}

TEST_CASE("selection is invariant under monotone rescaling of one metric") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    CandidateCell cell{"h", "m", "d", {}};
    for (int c = 0; c < 6; ++c) cell.candidates.push_back({"c" + std::to_string(c), oracle::random_metrics(rng, 10)});
    const auto before = select_best({cell}, GroupBy::Model)[0].text;
    auto rescaled = cell;
    for (auto& c : rescaled.candidates) c.metrics.bleu1 = std::exp(3 * c.metrics.bleu1) - 7;
    CHECK(select_best({rescaled}, GroupBy::Model)[0].text == before);
    rescaled = cell;
    for (auto& c : rescaled.candidates) c.metrics.rouge_l = c.metrics.rouge_l * c.metrics.rouge_l;
    CHECK(select_best({rescaled}, GroupBy::Model)[0].text == before);
  }
}

TEST_CASE("corpus report averages winners and measures diversity") {
  std::vector<Winner> winners;
  MetricVector sum{};
  Rng rng(13);
  for (int i = 0; i < 10; ++i) {
    Winner w;
    w.hs_id = "h" + std::to_string(i);
    w.group = "g";
    w.text = "counter narrative number " + std::to_string(i);
    w.metrics = oracle::random_metrics(rng, 100);
    sum.rouge_l += w.metrics.rouge_l;
    sum.bleu1 += w.metrics.bleu1;
    sum.bleu3 += w.metrics.bleu3;
    sum.bleu4 += w.metrics.bleu4;
    winners.push_back(w);
  }
  const std::vector<text::TokenSeq> training{text::tokenize("counter narrative about facts")};
  const auto rows = corpus_report(winners, training);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].count == 10);
  CHECK(std::abs(rows[0].mean.rouge_l - sum.rouge_l / 10) <= 1e-9);
  CHECK(std::abs(rows[0].mean.bleu1 - sum.bleu1 / 10) <= 1e-9);
  CHECK(std::abs(rows[0].mean.bleu3 - sum.bleu3 / 10) <= 1e-9);
  CHECK(std::abs(rows[0].mean.bleu4 - sum.bleu4 / 10) <= 1e-9);
  std::vector<oracle::Words> gen;
  for (const auto& w : winners) gen.push_back(text::tokenize(w.text).tokens);
  CHECK(rows[0].diversity.nov == doctest::Approx(oracle::novelty(gen, {training[0].tokens})));
  CHECK(rows[0].diversity.rr == doctest::Approx(oracle::repetition_rate(gen, 1000)));
  CHECK_THROWS_AS(corpus_report({}, training), ValidationError);

  const auto tsv = report_tsv(rows);
  CHECK(tsv.rfind("group\tROU\tB-1\tB-3\tB-4\tRR\tNOV\n", 0) == 0);
}

TEST_CASE("winners identical to references average to one") {
  const std::string ref = "we should listen to each other";
  const auto scored = metrics::score_candidates({ref}, ref);
  Winner w{"h", "g", "m", "d", 0, ref, scored[0], 1.0};
  const auto rows = corpus_report({w, w}, {text::tokenize("something else")});
  CHECK(rows[0].mean == MetricVector{1.0, 1.0, 1.0, 1.0});
}

TEST_CASE("cells and winners round trip through json") {
  CandidateCell cell{"h", "m", "d", {{"a b", mv(0.1, 0.2, 0.3, 0.4)}}};
  const auto back = cell_from_json(to_json(cell));
  CHECK(back.hs_id == "h");
  CHECK(back.candidates[0].metrics == cell.candidates[0].metrics);
  const auto w = select_best({cell}, GroupBy::Decoding)[0];
  const auto w2 = winner_from_json(to_json(w));
  CHECK(w2.text == w.text);
  CHECK(w2.group == "d");
  CHECK(w2.mean_rank == w.mean_rank);
  CHECK(parse_group_by(to_string(GroupBy::ModelDecoding)) == GroupBy::ModelDecoding);
}
