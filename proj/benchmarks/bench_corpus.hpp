// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic sentence material shared by the benchmarks.

#pragma once

#include <string>
#include <vector>

#include "cnkit/rng.hpp"
#include "cnkit/textkit.hpp"

namespace cnkit::bench {

inline std::string sentence(Rng& rng, std::size_t words, std::size_t vocab) {
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    if (!s.empty()) s += ' ';
    s += "w" + std::to_string(rng.below(vocab));
  }
  return s;
}

inline std::vector<text::TokenSeq> sentences(std::size_t n, std::size_t words, std::size_t vocab,
                                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<text::TokenSeq> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(text::tokenize(sentence(rng, words, vocab)));
  return out;
}

// A post-edit: a few substitutions and one block moved.
inline text::TokenSeq edited(const text::TokenSeq& s, Rng& rng) {
  auto w = s.tokens;
  for (int i = 0; i < 3 && !w.empty(); ++i) w[rng.below(w.size())] = "edit" + std::to_string(i);
  if (w.size() > 6) w = text::apply_shift(w, 1, 3, w.size() - 3);
  return text::TokenSeq::from_tokens(std::move(w));
}

}  // namespace cnkit::bench
