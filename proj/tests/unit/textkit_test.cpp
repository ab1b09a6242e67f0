// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "cnkit/error.hpp"
#include "cnkit/rng.hpp"
#include "cnkit/textkit.hpp"
#include "oracles.hpp"

using namespace cnkit;
using text::TokenSeq;

namespace {

TokenSeq seq(std::vector<std::string> w) { return TokenSeq::from_tokens(std::move(w)); }

std::vector<std::string> random_words(Rng& rng, std::size_t len, std::size_t vocab) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < len; ++i) w.push_back("v" + std::to_string(rng.below(vocab)));
  return w;
}

}  // namespace

TEST_CASE("tokenize lowercases and detaches punctuation") {
  CHECK(text::tokenize("The cat sat.").tokens == std::vector<std::string>{"the", "cat", "sat", "."});
  CHECK(text::tokenize("").tokens.empty());
  CHECK(text::tokenize("   \t\n ").tokens.empty());
  CHECK(text::tokenize("don't stop\xE2\x80\x94now").tokens ==
        std::vector<std::string>{"don", "'", "t", "stop", "\xE2\x80\x94", "now"});
  CHECK(text::tokenize("(a) [b]; c: d! e?").tokens ==
        std::vector<std::string>{"(", "a", ")", "[", "b", "]", ";", "c", ":", "d", "!", "e", "?"});
  CHECK(text::tokenize("\"Quoted,\" he said").tokens ==
        std::vector<std::string>{"\"", "quoted", ",", "\"", "he", "said"});
}

TEST_CASE("tokenize normalises to NFC before comparing") {
  // e + combining acute vs precomposed e-acute
  const auto decomposed = text::tokenize("Caf\x65\xcc\x81");
  const auto composed = text::tokenize("caf\xc3\xa9");
  CHECK(decomposed.tokens == composed.tokens);
  CHECK(text::tokenize("\xc3\x89" "COLE").tokens == std::vector<std::string>{"\xc3\xa9" "cole"});
}

TEST_CASE("tokenize is deterministic and never yields empty tokens") {
  Rng rng(3);
  const std::string alphabet = "ab .,!?'\"()[]-\t\n";
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const auto len = rng.below(40);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    const auto a = text::tokenize(s);
    CHECK(a.tokens == text::tokenize(s).tokens);
    for (const auto& t : a.tokens) CHECK_FALSE(t.empty());
  }
}

TEST_CASE("ngrams counts contiguous windows") {
  const auto s = seq({"a", "b", "a"});
  const auto uni = text::ngrams(s, 1);
  CHECK(uni.counts.size() == 2);
  CHECK(uni.count({"a"}) == 2);
  CHECK(uni.count({"b"}) == 1);
  const auto tri = text::ngrams(s, 3);
  CHECK(tri.counts.size() == 1);
  CHECK(tri.count({"a", "b", "a"}) == 1);
  CHECK(text::ngrams(s, 4).counts.empty());
  CHECK_THROWS_AS(text::ngrams(s, 0), ValidationError);
}

TEST_CASE("ngram totals telescope to len - n + 1") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = seq(random_words(rng, rng.below(15), 4));
    for (std::size_t n = 1; n <= 5; ++n) {
      const std::size_t expect = s.size() >= n ? s.size() - n + 1 : 0;
      CHECK(text::ngrams(s, n).total() == expect);
      for (const auto& [g, c] : text::ngrams(s, n).counts) {
        CHECK(g.size() == n);
        CHECK(c >= 1);
      }
    }
  }
}

TEST_CASE("lcs_length examples") {
  const auto a = seq({"a", "b", "c", "d", "e"});
  CHECK(text::lcs_length(a, a) == 5);
  CHECK(text::lcs_length(a, seq({"x", "y"})) == 0);
  CHECK(text::lcs_length(seq({"a", "b", "c", "d"}), seq({"a", "c", "b", "d"})) == 3);
  CHECK(oracle::lcs({"a", "b", "c", "d"}, {"a", "c", "b", "d"}) == 3);
  CHECK(text::lcs_length(seq({}), a) == 0);
}

TEST_CASE("lcs_length matches subsequence enumeration and its bounds") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_words(rng, rng.below(10), 4);
    const auto b = random_words(rng, rng.below(10), 4);
    const auto l = text::lcs_length(seq(a), seq(b));
    CHECK(l == oracle::lcs(a, b));
    CHECK(l == text::lcs_length(seq(b), seq(a)));
    CHECK(l <= std::min(a.size(), b.size()));
    CHECK((l == a.size()) == oracle::is_subsequence(a, b));
  }
}

TEST_CASE("ter examples") {
  const auto ref = seq({"we", "should", "talk", "about", "facts"});
  CHECK(text::ter(ref, ref) == 0.0);
  CHECK(text::ter(seq({"we", "should", "talk", "about", "lies"}), ref) == doctest::Approx(0.2));
  CHECK_THROWS_AS(text::ter(ref, seq({})), ValidationError);
  CHECK(text::ter(seq({}), ref) == doctest::Approx(1.0));

  // An adjacent bigram moved across the sentence costs one shift.
  const auto r = seq({"a", "b", "c", "d", "e", "f", "g", "h"});
  const auto h = seq({"c", "d", "e", "f", "g", "h", "a", "b"});
  const auto stats = text::ter_stats(h, r);
  CHECK(stats.shifts == 1);
  CHECK(stats.edits == 0);
  CHECK(text::ter(h, r) == doctest::Approx(1.0 / 8));
  CHECK(text::ter(h, r) == doctest::Approx(oracle::ter_single_shift(h.tokens, r.tokens)));
}

TEST_CASE("apply_shift moves a block to its destination") {
  const std::vector<std::string> w{"a", "b", "c", "d", "e"};
  CHECK(text::apply_shift(w, 0, 2, 3) == std::vector<std::string>{"c", "d", "e", "a", "b"});
  CHECK(text::apply_shift(w, 3, 2, 0) == std::vector<std::string>{"d", "e", "a", "b", "c"});
  CHECK(text::apply_shift(w, 1, 1, 2) == std::vector<std::string>{"a", "c", "b", "d", "e"});
  CHECK_THROWS_AS(text::apply_shift(w, 4, 2, 0), ValidationError);
}

TEST_CASE("ter bounds and identity on random pairs") {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = seq(random_words(rng, rng.below(9), 5));
    const auto r = seq(random_words(rng, 1 + rng.below(9), 5));
    const double t = text::ter(c, r);
    CHECK(t >= 0.0);
    CHECK(t <= static_cast<double>(c.size() + r.size()) / static_cast<double>(r.size()) + 1e-12);
    CHECK(t <= static_cast<double>(oracle::levenshtein(c.tokens, r.tokens)) / r.size() + 1e-12);
    CHECK(text::ter(r, r) == 0.0);
  }
}

TEST_CASE("ter follows the brute-force greedy shift search") {
  Rng rng(29);
  for (int trial = 0; trial < 400; ++trial) {
    const auto c = random_words(rng, rng.below(8), 4);
    const auto r = random_words(rng, 1 + rng.below(7), 4);
    const double t = text::ter(seq(c), seq(r));
    CHECK(std::abs(t - oracle::ter_greedy(c, r)) <= 1e-12);
    // the first round already reaches the best single shift
    CHECK(t <= oracle::ter_single_shift(c, r) + 1e-12);
  }
}

TEST_CASE("a block moved to the end is found whatever the alignment ties") {
  const auto r = seq({"w0", "w1", "w2", "w3", "w4"});
  const auto h = seq({"w3", "w4", "w0", "w1", "x"});
  const auto stats = text::ter_stats(h, r);
  CHECK(stats.shifts == 1);
  CHECK(stats.edits == 1);
  CHECK(text::ter(h, r) == doctest::Approx(oracle::ter_single_shift(h.tokens, r.tokens)));
}

TEST_CASE("edit_distance agrees with the recursive oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_words(rng, rng.below(9), 4);
    const auto b = random_words(rng, rng.below(9), 4);
    CHECK(text::edit_distance(a, b) == oracle::levenshtein(a, b));
  }
}
