// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/langmodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cnkit/error.hpp"

namespace cnkit::lm {

Vocabulary Vocabulary::build(const std::vector<text::TokenSeq>& corpus) {
  std::set<std::string> words;
  for (const auto& s : corpus) words.insert(s.tokens.begin(), s.tokens.end());
  std::vector<std::string> tokens{std::string(kBos), std::string(kEos), std::string(kUnk)};
  for (const auto& w : words) {
    if (w != kBos && w != kEos && w != kUnk) tokens.push_back(w);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("vocab", "duplicate vocabulary entry '" + tokens[i] + "'");
    }
  }
  auto reserved = [&](std::string_view name) {
    auto it = v.index_.find(std::string(name));
    if (it == v.index_.end()) throw ValidationError("vocab", "vocabulary lacks reserved entry " + std::string(name));
    return it->second;
  };
  v.tokens_ = std::move(tokens);
  v.bos_ = reserved(kBos);
  v.eos_ = reserved(kEos);
  v.unk_ = reserved(kUnk);
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const { return find(token).value_or(unk_); }

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) throw ValidationError("token", "token index " + std::to_string(id) + " out of vocabulary");
  return tokens_[id];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id_or_unk(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == eos_) break;
    if (id == bos_) continue;
    out.push_back(token(id));
  }
  return out;
}

Distribution::Distribution(std::vector<double> probs) : p_(std::move(probs)) {
  double sum = 0.0;
  for (double x : p_) {
    if (!(x >= 0.0)) throw ValidationError("probs", "distribution has a negative or NaN entry");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > kTolerance) {
    throw ValidationError("probs", "distribution sums to " + std::to_string(sum));
  }
}

Distribution Distribution::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double x : weights) {
    if (!(x >= 0.0) || std::isinf(x)) throw ValidationError("probs", "weights must be finite and non-negative");
    sum += x;
  }
  if (!(sum > 0.0)) throw ValidationError("probs", "weights have zero mass");
  for (double& x : weights) x /= sum;
  Distribution d;
  d.p_ = std::move(weights);
  return d;
}

std::size_t Distribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(p_.begin(), p_.end()) - p_.begin());
}

void check_context(const Vocabulary& vocab, std::span<const TokenId> context) {
  for (TokenId id : context) {
    if (!vocab.contains(id)) {
      throw ValidationError("context", "context index " + std::to_string(id) + " is out of vocabulary (size " +
                                           std::to_string(vocab.size()) + ")");
    }
  }
}

double sequence_log_prob(const LanguageModel& model, std::span<const TokenId> prefix,
                         std::span<const TokenId> continuation) {
  std::vector<TokenId> ctx(prefix.begin(), prefix.end());
  double lp = 0.0;
  for (TokenId t : continuation) {
    const auto d = model.next_distribution(ctx);
    lp += std::log(d[t]);
    ctx.push_back(t);
  }
  return lp;
}

std::vector<double> NgramLm::scores(std::span<const TokenId> context) const {
  std::vector<double> s = unigram_;
  for (std::size_t len = 1; len < order_ && len <= context.size(); ++len) {
    const std::vector<TokenId> h(context.end() - static_cast<long>(len), context.end());
    const auto& table = contexts_[len - 1];
    auto it = table.find(h);
    for (double& x : s) x *= kBackoff;
    if (it == table.end()) break;  // longer contexts are unseen as well
    for (const auto& [w, c] : it->second.next) {
      s[w] = static_cast<double>(c) / static_cast<double>(it->second.total);
    }
  }
  return s;
}

double NgramLm::score(TokenId word, std::span<const TokenId> context) const {
  check_context(vocab_, context);
  if (!vocab_.contains(word)) throw ValidationError("word", "word index out of vocabulary");
  return scores(context)[word];
}

Distribution NgramLm::next_distribution(std::span<const TokenId> context) const {
  check_context(vocab_, context);
  auto s = scores(context);
  s[vocab_.bos()] = 0.0;
  return Distribution::normalized(std::move(s));
}

NgramLm train_ngram(const std::vector<text::TokenSeq>& corpus, std::size_t order) {
  if (corpus.empty()) throw ValidationError("corpus", "cannot train an n-gram model on an empty corpus");
  if (order < 1) throw ValidationError("order", "n-gram order must be >= 1");
  NgramLm m;
  m.order_ = order;
  m.vocab_ = Vocabulary::build(corpus);
  m.contexts_.resize(order > 1 ? order - 1 : 0);

  std::vector<std::size_t> unigram_counts(m.vocab_.size(), 0);
  std::size_t predicted = 0;
  for (const auto& sentence : corpus) {
    std::vector<TokenId> framed{m.vocab_.bos()};
    for (TokenId id : m.vocab_.encode(sentence.tokens)) framed.push_back(id);
    framed.push_back(m.vocab_.eos());
    for (std::size_t i = 1; i < framed.size(); ++i) {
      ++unigram_counts[framed[i]];
      ++predicted;
      for (std::size_t len = 1; len < order && len <= i; ++len) {
        std::vector<TokenId> h(framed.begin() + static_cast<long>(i - len), framed.begin() + static_cast<long>(i));
        auto& stats = m.contexts_[len - 1][h];
        ++stats.total;
        ++stats.next[framed[i]];
      }
    }
  }

  // BOS is never a prediction target and carries no floor mass.
  const double denom = static_cast<double>(predicted) + NgramLm::kFloor * static_cast<double>(m.vocab_.size() - 1);
  m.unigram_.assign(m.vocab_.size(), 0.0);
  for (TokenId w = 0; w < m.vocab_.size(); ++w) {
    if (w == m.vocab_.bos()) continue;
    m.unigram_[w] = (static_cast<double>(unigram_counts[w]) + NgramLm::kFloor) / denom;
  }
  return m;
}

}  // namespace cnkit::lm
