// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cnkit/textkit.hpp"

namespace cnkit::lm {

using TokenId = std::uint32_t;

inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kUnk = "<unk>";

class Vocabulary {
 public:
  Vocabulary() = default;

  // Reserved entries first, then the corpus tokens in lexicographic order.
  static Vocabulary build(const std::vector<text::TokenSeq>& corpus);
  // Adopts an externally supplied index. Each reserved entry must appear
  // exactly once and tokens must be unique.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(TokenId id) const noexcept { return id < tokens_.size(); }
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  TokenId bos() const noexcept { return bos_; }
  TokenId eos() const noexcept { return eos_; }
  TokenId unk() const noexcept { return unk_; }

  std::vector<TokenId> encode(const std::vector<std::string>& words) const;
  // Drops BOS/EOS and stops at the first EOS.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId bos_ = 0, eos_ = 0, unk_ = 0;
};

// Next-token probability vector: non-negative entries summing to 1.
class Distribution {
 public:
  static constexpr double kTolerance = 1e-9;

  Distribution() = default;
  // Throws ValidationError unless the invariants already hold.
  explicit Distribution(std::vector<double> probs);
  // Scales non-negative weights to sum 1; throws on negative, NaN or zero mass.
  static Distribution normalized(std::vector<double> weights);

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  const std::vector<double>& probs() const noexcept { return p_; }
  std::size_t argmax() const;

 private:
  std::vector<double> p_;
};

// A next-token distribution provider. Implementations are immutable after
// construction or internally synchronised.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual Distribution next_distribution(std::span<const TokenId> context) const = 0;
};

// Throws ValidationError when an index lies outside the vocabulary.
void check_context(const Vocabulary& vocab, std::span<const TokenId> context);

// Sum of log P(token | prefix) over `continuation` given `prefix`.
double sequence_log_prob(const LanguageModel& model, std::span<const TokenId> prefix,
                         std::span<const TokenId> continuation);

// Stupid-backoff n-gram model. Raw scores follow
//   S(w | h) = c(h w) / c(h)        if c(h w) > 0
//            = 0.4 * S(w | h')      otherwise (h' drops the oldest token)
// bottoming out in an add-0.01 unigram estimate. Distributions are the
// scores normalised over the vocabulary; BOS is never predicted.
class NgramLm final : public LanguageModel {
 public:
  static constexpr double kBackoff = 0.4;
  static constexpr double kFloor = 0.01;

  const Vocabulary& vocabulary() const override { return vocab_; }
  Distribution next_distribution(std::span<const TokenId> context) const override;

  // Unnormalised stupid-backoff score.
  double score(TokenId word, std::span<const TokenId> context) const;
  std::size_t order() const noexcept { return order_; }

 private:
  friend NgramLm train_ngram(const std::vector<text::TokenSeq>& corpus, std::size_t order);

  struct ContextStats {
    std::size_t total = 0;
    std::map<TokenId, std::size_t> next;
  };

  std::vector<double> scores(std::span<const TokenId> context) const;

  std::size_t order_ = 3;
  Vocabulary vocab_;
  std::vector<double> unigram_;
  // contexts_[k] holds contexts of length k + 1.
  std::vector<std::map<std::vector<TokenId>, ContextStats>> contexts_;
};

// Sentences are framed as <bos> tokens <eos>.
NgramLm train_ngram(const std::vector<text::TokenSeq>& corpus, std::size_t order = 3);

}  // namespace cnkit::lm
