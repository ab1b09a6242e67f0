// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cnkit/error.hpp"

namespace cnkit::decoding {

namespace {

// Token indices ordered by probability (descending), then index.
std::vector<std::size_t> ranked(const Distribution& dist) {
  std::vector<std::size_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
  return idx;
}

Distribution keep(const Distribution& dist, const std::vector<std::size_t>& order, std::size_t count) {
  std::vector<double> out(dist.size(), 0.0);
  for (std::size_t i = 0; i < count; ++i) out[order[i]] = dist[order[i]];
  return Distribution::normalized(std::move(out));
}

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_probability = 0.0;
};

std::string lower_alnum(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '-' || c == '_') continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::BeamSearch: return "bs";
    case Method::TopK: return "topk";
    case Method::TopP: return "topp";
    case Method::TopPK: return "toppk";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  const std::string v = lower_alnum(s);
  if (v == "bs" || v == "beam" || v == "beamsearch") return Method::BeamSearch;
  if (v == "topk") return Method::TopK;
  if (v == "topp" || v == "nucleus") return Method::TopP;
  if (v == "toppk" || v == "topkp") return Method::TopPK;
  throw ValidationError("method", "unknown decoding method '" + std::string(s) + "'");
}

void DecodingConfig::validate() const {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p", "p must lie in (0, 1]");
  if (k < 1) throw ValidationError("k", "k must be >= 1");
  if (beams < 1) throw ValidationError("beams", "beams must be >= 1");
  if (!(repetition_penalty >= 1.0)) throw ValidationError("repetition_penalty", "repetition penalty must be >= 1");
  if (max_len < 1) throw ValidationError("max_len", "max_len must be >= 1");
  if (!(length_alpha >= 0.0)) throw ValidationError("length_alpha", "length normalisation exponent must be >= 0");
}

nlohmann::json DecodingConfig::to_json() const {
  return {{"method", std::string(to_string(method))},
          {"k", k},
          {"p", p},
          {"beams", beams},
          {"repetition_penalty", repetition_penalty},
          {"max_len", max_len},
          {"seed", seed},
          {"length_alpha", length_alpha}};
}

Distribution apply_repetition_penalty(const Distribution& dist, std::span<const TokenId> history, double penalty) {
  if (!(penalty >= 1.0)) throw ValidationError("repetition_penalty", "repetition penalty must be >= 1");
  if (penalty == 1.0 || history.empty()) return dist;
  std::vector<double> p = dist.probs();
  std::vector<bool> seen(p.size(), false);
  for (TokenId t : history) {
    if (t < p.size() && !seen[t]) {
      seen[t] = true;
      p[t] /= penalty;
    }
  }
  return Distribution::normalized(std::move(p));
}

Distribution truncate_top_k(const Distribution& dist, std::size_t k) {
  if (k < 1) throw ValidationError("k", "k must be >= 1");
  if (k >= dist.size()) return dist;
  return keep(dist, ranked(dist), k);
}

Distribution truncate_top_p(const Distribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p", "p must lie in (0, 1]");
  if (p >= 1.0) return dist;
  const auto order = ranked(dist);
  double mass = 0.0;
  std::size_t count = 0;
  while (count < order.size()) {
    mass += dist[order[count]];
    ++count;
    // Small slack so that e.g. 0.6 + 0.3 counts as reaching 0.9.
    if (mass + 1e-12 >= p) break;
  }
  return keep(dist, order, count);
}

Distribution sampling_distribution(const Distribution& dist, const DecodingConfig& config) {
  switch (config.method) {
    case Method::TopK: return truncate_top_k(dist, config.k);
    case Method::TopP: return truncate_top_p(dist, config.p);
    case Method::TopPK: return truncate_top_p(truncate_top_k(dist, config.k), config.p);
    case Method::BeamSearch: break;
  }
  throw ValidationError("method", "beam search does not sample");
}

namespace {

TokenId draw(const Distribution& d, Rng& rng) {
  const double u = rng.uniform01();
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) continue;
    last = i;
    cum += d[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last);
}

}  // namespace

TokenId sample_step(const Distribution& dist, const DecodingConfig& config, Rng& rng) {
  return draw(sampling_distribution(dist, config), rng);
}

std::vector<GenerationResult> beam_search_n(const LanguageModel& model, std::span<const TokenId> prompt,
                                            const DecodingConfig& config, std::size_t n) {
  config.validate();
  const TokenId eos = model.vocabulary().eos();
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  std::vector<TokenId> ctx;

  struct Expansion {
    std::size_t parent;
    TokenId token;
    double log_probability;
  };
  for (std::size_t step = 0; step < config.max_len && !live.empty(); ++step) {
    std::vector<Expansion> expansions;
    for (std::size_t b = 0; b < live.size(); ++b) {
      const auto& h = live[b];
      ctx.assign(prompt.begin(), prompt.end());
      ctx.insert(ctx.end(), h.tokens.begin(), h.tokens.end());
      Distribution d = model.next_distribution(ctx);
      d = apply_repetition_penalty(d, h.tokens, config.repetition_penalty);
      for (std::size_t w = 0; w < d.size(); ++w) {
        if (d[w] <= 0.0) continue;
        expansions.push_back({b, static_cast<TokenId>(w), h.log_probability + std::log(d[w])});
      }
    }
    // Highest log-probability first; ties go to the lexicographically
    // smaller token sequence.
    auto ranks_before = [&](const Expansion& a, const Expansion& b) {
      if (a.log_probability != b.log_probability) return a.log_probability > b.log_probability;
      const auto& ta = live[a.parent].tokens;
      const auto& tb = live[b.parent].tokens;
      if (a.parent != b.parent && ta != tb) return ta < tb;
      return a.token < b.token;
    };
    const std::size_t width = std::min(config.beams, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<long>(width), expansions.end(),
                      ranks_before);
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < width; ++i) {
      Hypothesis e;
      e.tokens.reserve(live[expansions[i].parent].tokens.size() + 1);
      e.tokens = live[expansions[i].parent].tokens;
      e.tokens.push_back(expansions[i].token);
      e.log_probability = expansions[i].log_probability;
      const bool done = e.tokens.back() == eos || e.tokens.size() >= config.max_len;
      (done ? finished : next).push_back(std::move(e));
    }
    live = std::move(next);
  }

  std::vector<GenerationResult> out;
  out.reserve(finished.size());
  for (auto& h : finished) {
    GenerationResult r;
    r.log_probability = h.log_probability;
    r.score = config.length_alpha == 0.0
                  ? h.log_probability
                  : h.log_probability / std::pow(static_cast<double>(h.tokens.size()), config.length_alpha);
    r.tokens = std::move(h.tokens);
    r.method = Method::BeamSearch;
    r.seed = config.seed;
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const GenerationResult& a, const GenerationResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

GenerationResult beam_search(const LanguageModel& model, std::span<const TokenId> prompt, const DecodingConfig& config) {
  auto best = beam_search_n(model, prompt, config, 1);
  if (best.empty()) throw Error("beam search produced no hypothesis");
  return std::move(best.front());
}

GenerationResult sample_sequence(const LanguageModel& model, std::span<const TokenId> prompt,
                                 const DecodingConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const TokenId eos = model.vocabulary().eos();
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  GenerationResult r;
  r.method = config.method;
  r.seed = seed;
  while (r.tokens.size() < config.max_len) {
    const Distribution d = sampling_distribution(model.next_distribution(ctx), config);
    const TokenId t = draw(d, rng);
    r.log_probability += std::log(d[t]);
    r.tokens.push_back(t);
    ctx.push_back(t);
    if (t == eos) break;
  }
  r.score = r.log_probability;
  return r;
}

std::string format_prompt(std::string_view hs) {
  std::string out(kPromptPrefix);
  out += ' ';
  out += hs;
  out += ' ';
  out += kPromptSuffix;
  return out;
}

std::vector<TokenId> encode_prompt(const lm::Vocabulary& vocab, std::string_view hs) {
  std::vector<TokenId> out{vocab.bos()};
  for (TokenId id : vocab.encode(text::tokenize(format_prompt(hs)).tokens)) out.push_back(id);
  return out;
}

text::TokenSeq conditioned_sequence(std::string_view hs, std::string_view cn) {
  auto seq = text::tokenize(format_prompt(hs));
  const auto tail = text::tokenize(cn);
  seq.tokens.insert(seq.tokens.end(), tail.tokens.begin(), tail.tokens.end());
  seq.source = format_prompt(hs) + " " + std::string(cn);
  return seq;
}

std::vector<GenerationResult> generate_candidates(const LanguageModel& model, std::string_view hs,
                                                  const DecodingConfig& config, std::size_t n) {
  config.validate();
  if (n < 1) throw ValidationError("n", "need at least one candidate");
  const auto prompt = encode_prompt(model.vocabulary(), hs);
  if (config.method == Method::BeamSearch) return beam_search_n(model, prompt, config, n);
  std::vector<GenerationResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_sequence(model, prompt, config, config.seed + i));
  return out;
}

std::string candidate_text(const lm::Vocabulary& vocab, const GenerationResult& r) {
  return text::detokenize(vocab.decode(r.tokens));
}

}  // namespace cnkit::decoding
