// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cnkit::text {

// Word units shared by every metric so that BLEU, ROUGE-L, RR, NOV and TER
// all see the same segmentation.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::string source;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }

  static TokenSeq from_tokens(std::vector<std::string> tokens);
};

using Ngram = std::vector<std::string>;

struct NgramCounts {
  std::size_t order = 1;
  std::map<Ngram, std::size_t> counts;

  std::size_t total() const;
  std::size_t count(const Ngram& g) const;
};

// Unicode NFC normalisation of UTF-8 text. Invalid UTF-8 is replaced with
// U+FFFD.
std::string nfc(std::string_view utf8);

// Lowercase, NFC-normalise, split on whitespace and detach the punctuation
// marks . , ; : ! ? " ' ( ) [ ] and U+2014 as standalone tokens.
TokenSeq tokenize(std::string_view text);

// Space-joined surface form of a token sequence.
std::string detokenize(const std::vector<std::string>& tokens);

NgramCounts ngrams(const TokenSeq& seq, std::size_t n);

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b);

// Word-level Levenshtein distance with unit costs.
std::size_t edit_distance(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

struct TerOptions {
  std::size_t max_shift_iterations = 50;
  std::size_t max_shift_size = 10;
};

struct TerStats {
  std::size_t shifts = 0;
  std::size_t edits = 0;
  std::size_t reference_length = 0;

  double score() const { return static_cast<double>(shifts + edits) / static_cast<double>(reference_length); }
};

// Moves the block [start, start+len) of `words` so that it begins at index
// `dest` of the result.
std::vector<std::string> apply_shift(const std::vector<std::string>& words, std::size_t start,
                                     std::size_t len, std::size_t dest);

// Translation Error Rate with greedy block-shift search. Throws
// ValidationError when the reference is empty.
TerStats ter_stats(const TokenSeq& candidate, const TokenSeq& reference, const TerOptions& opts = {});
double ter(const TokenSeq& candidate, const TokenSeq& reference, const TerOptions& opts = {});

}  // namespace cnkit::text
