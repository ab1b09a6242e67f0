// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cnkit/langmodel.hpp"
#include "cnkit/rng.hpp"

namespace cnkit::decoding {

using lm::Distribution;
using lm::LanguageModel;
using lm::TokenId;

enum class Method { BeamSearch, TopK, TopP, TopPK };

std::string_view to_string(Method m);
// Accepts bs, topk, topp, toppk (case-insensitive, '-' and '_' ignored).
Method parse_method(std::string_view s);

struct DecodingConfig {
  Method method = Method::TopK;
  std::size_t k = 40;
  double p = 0.92;
  std::size_t beams = 5;
  double repetition_penalty = 2.0;
  std::size_t max_len = 128;
  std::uint64_t seed = 0;
  double length_alpha = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct GenerationResult {
  std::vector<TokenId> tokens;  // generated tokens, ending at EOS or max_len
  double log_probability = 0.0;
  double score = 0.0;           // ranking score (length-normalised for beams)
  Method method = Method::TopK;
  std::uint64_t seed = 0;
};

// Divides the probability of every token seen in `history` by `penalty`
// and renormalises.
Distribution apply_repetition_penalty(const Distribution& dist, std::span<const TokenId> history, double penalty);

// Ties at the cut-off are resolved toward the lower token index.
Distribution truncate_top_k(const Distribution& dist, std::size_t k);
Distribution truncate_top_p(const Distribution& dist, double p);

// The distribution `sample_step` draws from under `config`.
Distribution sampling_distribution(const Distribution& dist, const DecodingConfig& config);

// Inverse-CDF draw from sampling_distribution(dist, config); consumes one
// uniform from `rng`.
TokenId sample_step(const Distribution& dist, const DecodingConfig& config, Rng& rng);

// Returns up to `n` finished hypotheses ranked by log P / len^alpha.
std::vector<GenerationResult> beam_search_n(const LanguageModel& model, std::span<const TokenId> prompt,
                                            const DecodingConfig& config, std::size_t n);
GenerationResult beam_search(const LanguageModel& model, std::span<const TokenId> prompt, const DecodingConfig& config);

GenerationResult sample_sequence(const LanguageModel& model, std::span<const TokenId> prompt,
                                 const DecodingConfig& config, std::uint64_t seed);

// Conditioning format for an HS: "HS <hs> CN", tokenised and preceded by BOS.
inline constexpr std::string_view kPromptPrefix = "HS";
inline constexpr std::string_view kPromptSuffix = "CN";
std::string format_prompt(std::string_view hs);
std::vector<TokenId> encode_prompt(const lm::Vocabulary& vocab, std::string_view hs);

// Training sequence for prompt-conditioned n-gram models: "HS <hs> CN <cn>".
text::TokenSeq conditioned_sequence(std::string_view hs, std::string_view cn);

// n seeded samples (seed + i) for stochastic methods, or the n best
// finished beams for beam search.
std::vector<GenerationResult> generate_candidates(const LanguageModel& model, std::string_view hs,
                                                  const DecodingConfig& config, std::size_t n = 5);

std::string candidate_text(const lm::Vocabulary& vocab, const GenerationResult& r);

}  // namespace cnkit::decoding
