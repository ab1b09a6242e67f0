// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cnkit/error.hpp"
#include "cnkit/langmodel.hpp"
#include "cnkit/rng.hpp"
#include "fixtures.hpp"

using namespace cnkit;
using namespace cnkit::lm;

namespace {

double sum(const Distribution& d) { return std::accumulate(d.probs().begin(), d.probs().end(), 0.0); }

std::vector<text::TokenSeq> small_corpus() {
  return {text::tokenize("we should respect everyone"), text::tokenize("we should talk with facts"),
          text::tokenize("everyone deserves respect and facts"), text::tokenize("talk with everyone")};
}

}  // namespace

TEST_CASE("vocabulary layout and reserved entries") {
  const auto v = Vocabulary::build({text::tokenize("b a c a")});
  CHECK(v.tokens() == std::vector<std::string>{"<bos>", "<eos>", "<unk>", "a", "b", "c"});
  CHECK(v.bos() == 0);
  CHECK(v.eos() == 1);
  CHECK(v.unk() == 2);
  CHECK(v.id_or_unk("zzz") == v.unk());
  const std::vector<TokenId> ids{v.bos(), 3, 4, v.eos(), 5};
  CHECK(v.decode(ids) == std::vector<std::string>{"a", "b"});
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<bos>", "<eos>", "a"}), ValidationError);
  CHECK_THROWS_AS(Vocabulary::from_tokens({"<bos>", "<eos>", "<unk>", "a", "a"}), ValidationError);
  CHECK_THROWS_AS(v.token(99), ValidationError);
}

TEST_CASE("distribution invariants") {
  CHECK_NOTHROW(Distribution({0.25, 0.75}));
  CHECK_THROWS_AS(Distribution({0.5, 0.4}), ValidationError);
  CHECK_THROWS_AS(Distribution({1.5, -0.5}), ValidationError);
  CHECK_THROWS_AS(Distribution::normalized({0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(Distribution::normalized({1.0, std::nan("")}), ValidationError);
  const auto d = Distribution::normalized({1.0, 3.0});
  CHECK(d[1] == doctest::Approx(0.75));
  CHECK(d.argmax() == 1);
}

TEST_CASE("n-gram on a single bigram") {
  const auto m = train_ngram({text::tokenize("a b")}, 2);
  const auto& v = m.vocabulary();
  const TokenId a = *v.find("a"), b = *v.find("b");
  const std::vector<TokenId> ctx{a};
  // one occurrence of context a, always followed by b
  CHECK(m.score(b, ctx) == 1.0);
  const auto d = m.next_distribution(ctx);
  CHECK(d.argmax() == b);
  CHECK(d[v.bos()] == 0.0);
  CHECK(std::abs(sum(d) - 1.0) <= 1e-9);
  CHECK_THROWS_AS(train_ngram({}, 2), ValidationError);
  CHECK_THROWS_AS(train_ngram({text::tokenize("a")}, 0), ValidationError);
}

TEST_CASE("unseen context backs off to the lower order") {
  const auto m = train_ngram(small_corpus(), 3);
  const auto& v = m.vocabulary();
  const TokenId unk = v.unk();
  const TokenId we = *v.find("we");
  const std::vector<TokenId> empty;
  const std::vector<TokenId> unseen{unk};
  const std::vector<TokenId> unseen2{unk, unk};
  const auto d0 = m.next_distribution(empty);
  const auto d1 = m.next_distribution(unseen);
  const auto d2 = m.next_distribution(unseen2);
  for (std::size_t i = 0; i < d0.size(); ++i) {
    CHECK(d1[i] == doctest::Approx(d0[i]).epsilon(1e-12));
    CHECK(d2[i] == doctest::Approx(d0[i]).epsilon(1e-12));
  }
  // "unk we" is unseen as a bigram context but "we" is seen: the trigram
  // layer backs off to the bigram distribution after "we".
  const std::vector<TokenId> partly{unk, we};
  const std::vector<TokenId> just_we{we};
  const auto dp = m.next_distribution(partly);
  const auto dw = m.next_distribution(just_we);
  for (std::size_t i = 0; i < dp.size(); ++i) CHECK(dp[i] == doctest::Approx(dw[i]).epsilon(1e-12));
  // empty context: the add-0.01 unigram estimate, BOS excluded
  CHECK(d0.argmax() != v.bos());
}

TEST_CASE("next_distribution is pure and rejects out-of-vocabulary context") {
  const auto m = train_ngram(small_corpus(), 3);
  const std::vector<TokenId> ctx{m.vocabulary().bos(), *m.vocabulary().find("we")};
  CHECK(m.next_distribution(ctx).probs() == m.next_distribution(ctx).probs());
  const std::vector<TokenId> bad{999};
  CHECK_THROWS_AS(m.next_distribution(bad), ValidationError);
}

TEST_CASE("n-gram distributions normalise over random contexts") {
  const auto data = testing::synthetic_dataset({.records = 80, .seed = 12});
  std::vector<text::TokenSeq> corpus;
  for (const auto& r : data) corpus.push_back(text::tokenize(r.cn));
  for (std::size_t order : {1, 2, 3, 4}) {
    const auto m = train_ngram(corpus, order);
    Rng rng(order);
    for (int trial = 0; trial < 250; ++trial) {
      std::vector<TokenId> ctx(rng.below(5));
      for (auto& t : ctx) t = static_cast<TokenId>(rng.below(m.vocabulary().size()));
      const auto d = m.next_distribution(ctx);
      CHECK(std::abs(sum(d) - 1.0) <= 1e-9);
      for (double p : d.probs()) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("training sentences outscore their shuffles") {
  const auto data = testing::synthetic_dataset({.records = 120, .seed = 21});
  std::vector<text::TokenSeq> corpus;
  for (const auto& r : data) corpus.push_back(text::tokenize(r.cn));
  const auto m = train_ngram(corpus, 3);
  const auto& v = m.vocabulary();
  auto avg_lp = [&](const std::vector<text::TokenSeq>& sents) {
    double total = 0.0;
    for (const auto& s : sents) {
      auto ids = v.encode(s.tokens);
      ids.push_back(v.eos());
      const std::vector<TokenId> prefix{v.bos()};
      total += sequence_log_prob(m, prefix, ids);
    }
    return total / static_cast<double>(sents.size());
  };
  const double original = avg_lp(corpus);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto shuffled = corpus;
    for (auto& s : shuffled) rng.shuffle(s.tokens);
    CHECK(original > avg_lp(shuffled));
  }
}

TEST_CASE("toy model satisfies the provider contract") {
  testing::ToyLm toy(3, 99);
  CHECK(toy.vocabulary().size() == 6);
  const std::vector<TokenId> ctx{3, 4};
  const auto d = toy.next_distribution(ctx);
  CHECK(d[toy.vocabulary().bos()] == 0.0);
  CHECK(std::abs(sum(d) - 1.0) <= 1e-9);
  CHECK(d.probs() == toy.next_distribution(ctx).probs());
}
