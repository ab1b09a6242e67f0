// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <csignal>
#include <fstream>
#include <set>

#include <sys/wait.h>
#include <unistd.h>

#include "cnkit/humaneval.hpp"
#include "fixtures.hpp"
#include "humaneval_oracles.hpp"

using namespace cnkit;
using namespace cnkit::humaneval;

namespace {

const std::vector<std::string> kModels{"bert", "dialogpt", "gpt2", "bart", "t5"};
const std::vector<std::string> kDecodings{"bs", "topk", "topp", "toppk"};

std::vector<EvaluationItem> small_batch(std::size_t hs, std::size_t sample, std::uint64_t seed = 3) {
  std::map<std::string, std::string> text;
  const auto winners = testing::best_lm_winners(hs, kModels, kDecodings, text, seed);
  return build_eval_batch(winners, text, sample, seed);
}

AnnotationRecord rec(const std::string& who, const EvaluationItem& item, std::size_t cand, int score, bool cho,
                     bool best) {
  return {who, item.hs_id, item.candidates[cand].cn_id, score, score, score, cho, best, "", ""};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("record validation names the field") {
  AnnotationRecord r{"a", "h", "c", 3, 3, 3, false, false, "", ""};
  CHECK_NOTHROW(validate(r));
  for (int bad : {0, 6}) {
    r.sui = bad;
    try {
      validate(r);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.field() == "sui");
    }
  }
  auto j = to_json(AnnotationRecord{"a", "h", "c", 3, 4, 5, true, false, "t", ""});
  CHECK(annotation_from_json(j).grm == 5);
  j["spe"] = 4.5;
  CHECK_THROWS_AS(annotation_from_json(j), ValidationError);
  j["spe"] = 4;
  j["cho"] = 2;
  CHECK_THROWS_AS(annotation_from_json(j), ValidationError);
  j["cho"] = 1;
  CHECK(annotation_from_json(j).cho);
}

TEST_CASE("batch sampling") {
  const auto batch = small_batch(500, 200);
  CHECK(batch.size() == 200);
  for (const auto& item : batch) {
    std::set<std::string> models;
    for (const auto& c : item.candidates) models.insert(c.model_id);
    CHECK(models.size() == kModels.size());
    CHECK(item.candidates.size() == kModels.size());
  }
  const auto again = small_batch(500, 200);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(to_json(batch[i]) == to_json(again[i]));
  }
  // full sample still shuffles per item
  const auto full = small_batch(30, 30);
  CHECK(full.size() == 30);
  std::size_t reordered = 0;
  for (const auto& item : full) {
    std::vector<std::string> order;
    for (const auto& c : item.candidates) order.push_back(c.model_id);
    if (order != kModels) ++reordered;
  }
  CHECK(reordered > 20);
  CHECK_THROWS_AS(small_batch(30, 31), ConstraintError);
}

TEST_CASE("annotator payloads carry no provenance") {
  const auto batch = small_batch(50, 50);
  for (const auto& item : batch) {
    const auto bytes = annotator_payload(item).dump();
    for (const auto& m : kModels) CHECK(bytes.find(m) == std::string::npos);
    for (const auto& d : kDecodings) CHECK(bytes.find(d) == std::string::npos);
    CHECK(bytes.find(item.hs) != std::string::npos);
  }
  const auto cs = oracle::numbered_comparisons(5, 1);
  for (const auto& c : cs) {
    const auto bytes = annotator_payload(c).dump();
    CHECK(bytes.find("original") != std::string::npos);
    CHECK(bytes.find("ape") == std::string::npos);
  }
}

TEST_CASE("is-best is exclusive per annotator and hs") {
  const auto batch = small_batch(10, 2);
  AnnotationStore store;
  const auto& item = batch[0];
  CHECK_FALSE(store.submit(rec("a1", item, 0, 4, true, true)).duplicate);
  try {
    store.submit(rec("a1", item, 1, 4, true, true));
    FAIL("expected BestConflict");
  } catch (const BestConflict& e) {
    CHECK(e.conflicting_cn_id() == item.candidates[0].cn_id);
  }
  // other annotators and other items are independent
  CHECK_NOTHROW(store.submit(rec("a2", item, 1, 4, true, true)));
  CHECK_NOTHROW(store.submit(rec("a1", batch[1], 1, 4, true, true)));
  // multi-select for cho
  CHECK_NOTHROW(store.submit(rec("a1", item, 2, 3, true, false)));
  CHECK_NOTHROW(store.submit(rec("a1", item, 3, 3, true, false)));
  // retracting frees the slot
  store.submit(rec("a1", item, 0, 4, true, false));
  CHECK_NOTHROW(store.submit(rec("a1", item, 1, 5, true, true)));
  CHECK(oracle::best_is_exclusive(store.annotations()));
  CHECK(store.log_size() == 7);
  CHECK(store.annotations().size() == 6);
}

TEST_CASE("idempotent replays write nothing") {
  const auto batch = small_batch(5, 1);
  AnnotationStore store;
  auto r = rec("a", batch[0], 0, 2, false, false);
  r.idempotency_key = "submit-1";
  const auto first = store.submit(r);
  const auto replay = store.submit(r);
  CHECK_FALSE(first.duplicate);
  CHECK(replay.duplicate);
  CHECK(replay.sequence == first.sequence);
  CHECK(store.log_size() == 1);
  VerdictRecord v{"a", "c0", Verdict::Tie, "", "v-1"};
  CHECK_FALSE(store.submit(v).duplicate);
  CHECK(store.submit(v).duplicate);
  CHECK(store.verdicts().size() == 1);
}

TEST_CASE("randomized submissions keep the current view consistent") {
  const auto batch = small_batch(20, 8);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    AnnotationStore store;
    const auto run = oracle::random_submissions(store, batch, seed, 60);
    CHECK(oracle::best_is_exclusive(store.annotations()));
    CHECK(run.conflicts == run.conflicts_named_correctly);
    CHECK(store.log_size() == run.accepted);
  }
}

TEST_CASE("log persists, supersedes and survives a torn tail") {
  testing::TempDir dir;
  const auto path = dir / "log.jsonl";
  const auto batch = small_batch(5, 2);
  {
    AnnotationStore store(path);
    store.submit(rec("a", batch[0], 0, 2, false, false));
    store.submit(rec("a", batch[0], 0, 4, true, false));
    store.submit(VerdictRecord{"a", "c1", Verdict::First, "", ""});
  }
  const auto intact = slurp(path);
  {
    std::ofstream out(path, std::ios::app);
    out << R"({"kind":"annotation","record":{"annotator_id":"a","hs)";
  }
  AnnotationStore store(path);
  CHECK(store.dropped_torn_lines() == 1);
  CHECK(store.log_size() == 3);
  CHECK(store.annotations().size() == 1);
  CHECK(store.annotations()[0].sui == 4);
  CHECK(store.verdicts().size() == 1);
  CHECK(slurp(path) == intact);
  store.submit(rec("b", batch[1], 1, 5, true, true));
  CHECK(store.log_size() == 4);

  // damage in the middle is not silently skipped
  testing::TempDir other;
  {
    std::ofstream out(other / "bad.jsonl");
    out << "{broken\n" << intact;
  }
  CHECK_THROWS_AS(AnnotationStore(other / "bad.jsonl"), ValidationError);
}

TEST_CASE("a killed writer leaves a readable log") {
  testing::TempDir dir;
  const auto path = dir / "crash.jsonl";
  const auto batch = small_batch(20, 10);
  int pipefd[2];
  REQUIRE(::pipe(pipefd) == 0);
  const pid_t child = ::fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    ::close(pipefd[0]);
    AnnotationStore store(path);
    Rng rng(1);
    for (std::uint64_t i = 0;; ++i) {
      const auto& item = batch[rng.below(batch.size())];
      const auto ack = store.submit(rec("a" + std::to_string(i % 4), item, rng.below(5), 3, true, false));
      const std::uint64_t seq = ack.sequence;
      if (::write(pipefd[1], &seq, sizeof seq) != sizeof seq) ::_exit(1);
    }
  }
  ::close(pipefd[1]);
  std::uint64_t last = 0;
  std::size_t acks = 0;
  while (acks < 300) {
    std::uint64_t seq;
    if (::read(pipefd[0], &seq, sizeof seq) != sizeof seq) break;
    last = seq;
    ++acks;
  }
  ::kill(child, SIGKILL);
  int status = 0;
  ::waitpid(child, &status, 0);
  ::close(pipefd[0]);
  REQUIRE(acks == 300);
  AnnotationStore store(path);
  // every acknowledged entry is there; at most one trailing line was lost
  CHECK(store.log_size() >= last + 1);
  CHECK(store.dropped_torn_lines() <= 1);
  const auto log = store.log();
  for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i]["seq"] == i);
}

TEST_CASE("aggregation examples") {
  const auto batch = small_batch(5, 1);
  const auto& item = batch[0];
  {
    const auto rows = aggregate_human({rec("a", item, 0, 5, true, true)}, batch, selection::GroupBy::Model);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].group == item.candidates[0].model_id);
    CHECK(rows[0].sui == 5.0);
    CHECK(rows[0].spe == 5.0);
    CHECK(rows[0].grm == 5.0);
    CHECK(rows[0].cho == 1.0);
    CHECK(rows[0].best == 1.0);
  }
  const auto rows =
      aggregate_human({rec("a", item, 0, 3, false, false), rec("b", item, 0, 5, true, false)}, batch,
                      selection::GroupBy::Model);
  CHECK(rows[0].sui == 4.0);
  CHECK(rows[0].cho == 0.5);
  CHECK(human_tsv(rows).rfind("group\tN\tSUI\tSPE\tGRM\tCHO\tBEST\n", 0) == 0);
  CHECK_THROWS_AS(aggregate_human({}, batch, selection::GroupBy::Model), ValidationError);
}

TEST_CASE("aggregation matches the flat-file oracle") {
  const auto batch = small_batch(12, 6);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    AnnotationStore store;
    oracle::random_submissions(store, batch, seed, 12);
    if (store.annotations().empty()) continue;
    for (auto g : {selection::GroupBy::Model, selection::GroupBy::Decoding, selection::GroupBy::ModelDecoding}) {
      const auto rows = aggregate_human(store.annotations(), batch, g);
      const auto expect = oracle::flat_aggregate(store.annotations(), batch, g);
      REQUIRE(rows.size() == expect.size());
      for (const auto& row : rows) {
        const auto& e = expect.at(row.group);
        CHECK(row.records == e.n);
        CHECK(row.sui == doctest::Approx(e.mean[0]).epsilon(1e-12));
        CHECK(row.spe == doctest::Approx(e.mean[1]).epsilon(1e-12));
        CHECK(row.grm == doctest::Approx(e.mean[2]).epsilon(1e-12));
        CHECK(row.cho == doctest::Approx(e.mean[3]).epsilon(1e-12));
        CHECK(row.best == doctest::Approx(e.mean[4]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("aggregation over the log equals aggregation over a reopened export") {
  testing::TempDir dir;
  const auto batch = small_batch(12, 6);
  std::vector<AnnotationRecord> live;
  {
    AnnotationStore store(dir / "log.jsonl");
    oracle::random_submissions(store, batch, 5, 80);
    live = store.annotations();
  }
  AnnotationStore reopened(dir / "log.jsonl");
  const auto a = aggregate_human(live, batch, selection::GroupBy::ModelDecoding);
  const auto b = aggregate_human(reopened.annotations(), batch, selection::GroupBy::ModelDecoding);
  CHECK(human_tsv(a) == human_tsv(b));
}

TEST_CASE("comparison order is a function of the seed") {
  const auto a = oracle::numbered_comparisons(40, 9);
  const auto b = oracle::numbered_comparisons(40, 9);
  std::size_t ape_first = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].ape_first() == b[i].ape_first());
    CHECK(comparison_from_json(to_json(a[i])).ape_first() == a[i].ape_first());
    if (a[i].ape_first()) ++ape_first;
    CHECK(a[i].first() != a[i].second());
  }
  CHECK(ape_first > 5);
  CHECK(ape_first < 35);
  CHECK(parse_verdict(to_string(Verdict::Second)) == Verdict::Second);
}

TEST_CASE("preference tally de-randomises verdicts") {
  const auto cs = oracle::numbered_comparisons(100, 4);
  {
    const auto t = ape_preference_tally(cs, oracle::verdicts_for(cs, "x", 0, 0));
    CHECK(t.mean.prefer_ape == 0.0);
    CHECK(t.mean.prefer_original == 0.0);
    CHECK(t.mean.tie == 100.0);
  }
  auto v = oracle::verdicts_for(cs, "x", 30, 10);
  const auto y = oracle::verdicts_for(cs, "y", 22, 18);
  v.insert(v.end(), y.begin(), y.end());
  const auto t = ape_preference_tally(cs, v);
  CHECK(t.mean.prefer_ape == doctest::Approx(26.0));
  CHECK(t.mean.prefer_original == doctest::Approx(14.0));
  CHECK(t.mean.tie == doctest::Approx(60.0));
  for (const auto& [who, p] : t.per_annotator) {
    CHECK(std::abs(p.prefer_ape + p.prefer_original + p.tie - 100.0) <= 0.5);
  }
  CHECK(tally_tsv(t).find("mean\t26.00\t14.00\t60.00") != std::string::npos);

  auto missing = v;
  missing.pop_back();
  CHECK_THROWS_WITH_AS(ape_preference_tally(cs, missing), doctest::Contains("y:c99"), ConstraintError);
}
