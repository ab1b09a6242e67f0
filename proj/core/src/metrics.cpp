// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cnkit/error.hpp"
#include "cnkit/rng.hpp"

namespace cnkit::metrics {

nlohmann::json to_json(const MetricVector& m) {
  return {{"rouge_l", m.rouge_l}, {"bleu1", m.bleu1}, {"bleu3", m.bleu3}, {"bleu4", m.bleu4}};
}

MetricVector metric_vector_from_json(const nlohmann::json& j) {
  MetricVector m;
  m.rouge_l = j.at("rouge_l").get<double>();
  m.bleu1 = j.at("bleu1").get<double>();
  m.bleu3 = j.at("bleu3").get<double>();
  m.bleu4 = j.at("bleu4").get<double>();
  return m;
}

double bleu_n(const TokenSeq& candidate, const TokenSeq& reference, int n) {
  if (n < 1) throw ValidationError("n", "BLEU order must be >= 1");
  if (reference.empty()) throw ValidationError("reference", "BLEU needs a non-empty reference");
  if (candidate.empty()) return 0.0;

  double log_precision = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = text::ngrams(candidate, static_cast<std::size_t>(k));
    const auto ref = text::ngrams(reference, static_cast<std::size_t>(k));
    std::size_t matched = 0;
    for (const auto& [gram, c] : cand.counts) matched += std::min(c, ref.count(gram));
    const std::size_t total = cand.total();
    if (k == 1) {
      if (matched == 0) return 0.0;
      log_precision += std::log(static_cast<double>(matched) / static_cast<double>(total));
    } else {
      log_precision += std::log(static_cast<double>(matched + 1) / static_cast<double>(total + 1));
    }
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_precision / n);
}

double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) throw ValidationError("rouge_l", "ROUGE-L needs non-empty inputs");
  const std::size_t lcs = text::lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

std::vector<std::array<double, 4>> repetition_fractions(const std::vector<TokenSeq>& corpus,
                                                        const RepetitionOptions& opts) {
  if (opts.window == 0) throw ValidationError("window", "RR window must be positive");
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (opts.shuffle_seed) {
    Rng rng(*opts.shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<std::string> flat;
  for (std::size_t i : order) flat.insert(flat.end(), corpus[i].tokens.begin(), corpus[i].tokens.end());
  if (flat.empty()) throw ValidationError("corpus", "repetition rate needs at least one token");

  const std::size_t w = opts.window;
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  const std::size_t full = flat.size() / w;
  for (std::size_t i = 0; i < full; ++i) windows.emplace_back(i * w, w);
  const std::size_t tail = flat.size() - full * w;
  // The tail counts when it is at least half a window, or when it is all
  // there is.
  if (tail > 0 && (2 * tail >= w || full == 0)) windows.emplace_back(full * w, tail);

  std::vector<std::array<double, 4>> out;
  for (const auto& [start, len] : windows) {
    std::array<double, 4> fr{};
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string_view>, std::size_t> types;
      for (std::size_t i = start; i + n <= start + len; ++i) {
        std::vector<std::string_view> g;
        g.reserve(n);
        for (std::size_t k = 0; k < n; ++k) g.emplace_back(flat[i + k]);
        ++types[g];
      }
      std::size_t repeated = 0;
      for (const auto& [g, c] : types) repeated += c > 1 ? 1 : 0;
      fr[n - 1] = types.empty() ? 0.0 : static_cast<double>(repeated) / static_cast<double>(types.size());
    }
    out.push_back(fr);
  }
  return out;
}

double repetition_rate(const std::vector<TokenSeq>& corpus, const RepetitionOptions& opts) {
  const auto fractions = repetition_fractions(corpus, opts);
  double product = 1.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double mean = 0.0;
    for (const auto& f : fractions) mean += f[n];
    mean /= static_cast<double>(fractions.size());
    product *= mean;
  }
  return 100.0 * std::pow(product, 0.25);
}

double jaccard(const TokenSeq& a, const TokenSeq& b) {
  const std::set<std::string> sa(a.tokens.begin(), a.tokens.end());
  const std::set<std::string> sb(b.tokens.begin(), b.tokens.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::vector<double> novelty_per_item(const std::vector<TokenSeq>& generated, const std::vector<TokenSeq>& training) {
  if (training.empty()) throw ValidationError("training", "novelty needs a non-empty training set");
  // Sorted unique token sets make the pairwise intersections linear.
  auto as_set = [](const TokenSeq& s) {
    std::vector<std::string> v(s.tokens);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  std::vector<std::vector<std::string>> train_sets;
  train_sets.reserve(training.size());
  for (const auto& t : training) train_sets.push_back(as_set(t));

  std::vector<double> out;
  out.reserve(generated.size());
  for (const auto& g : generated) {
    const auto gs = as_set(g);
    double best = 0.0;
    for (const auto& ts : train_sets) {
      std::size_t inter = 0;
      auto i = gs.begin();
      auto j = ts.begin();
      while (i != gs.end() && j != ts.end()) {
        if (*i < *j) {
          ++i;
        } else if (*j < *i) {
          ++j;
        } else {
          ++inter;
          ++i;
          ++j;
        }
      }
      const std::size_t uni = gs.size() + ts.size() - inter;
      const double jac = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      best = std::max(best, jac);
      if (best == 1.0) break;
    }
    out.push_back(1.0 - best);
  }
  return out;
}

double novelty(const std::vector<TokenSeq>& generated, const std::vector<TokenSeq>& training) {
  const auto per = novelty_per_item(generated, training);
  if (per.empty()) throw ValidationError("generated", "novelty needs at least one generated item");
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / static_cast<double>(per.size());
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cols;
}

bool parse_index(std::string_view s, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::vector<ConlluDocument> parse_conllu_documents(std::string_view conllu) {
  std::vector<ConlluDocument> docs(1);
  DependencyTree sentence;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!sentence.heads.empty()) {
      for (std::size_t h : sentence.heads) {
        if (h > sentence.heads.size()) {
          throw ValidationError("HEAD", "line " + std::to_string(lineno) + ": head " + std::to_string(h) +
                                            " outside sentence of length " + std::to_string(sentence.heads.size()));
        }
      }
      docs.back().parsed.sentences.push_back(std::move(sentence));
      sentence = {};
    }
  };
  std::size_t pos = 0;
  while (pos <= conllu.size()) {
    const auto nl = conllu.find('\n', pos);
    std::string_view line = conllu.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? conllu.size() + 1 : nl + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    if (line.front() == '#') {
      constexpr std::string_view kNewdoc = "# newdoc";
      if (line.substr(0, kNewdoc.size()) == kNewdoc) {
        flush();
        if (!docs.back().parsed.sentences.empty() || !docs.back().id.empty()) docs.emplace_back();
        const auto eq = line.find('=');
        if (eq != std::string_view::npos) {
          std::string_view id = line.substr(eq + 1);
          while (!id.empty() && id.front() == ' ') id.remove_prefix(1);
          docs.back().id = std::string(id);
        }
      }
      continue;
    }
    const auto cols = split_tabs(line);
    if (cols.size() != 10) {
      throw ValidationError("columns", "line " + std::to_string(lineno) + ": expected 10 tab-separated columns, got " +
                                           std::to_string(cols.size()));
    }
    if (cols[0].find('-') != std::string_view::npos || cols[0].find('.') != std::string_view::npos) continue;
    std::size_t id = 0, head = 0;
    if (!parse_index(cols[0], id) || id != sentence.heads.size() + 1) {
      throw ValidationError("ID", "line " + std::to_string(lineno) + ": token ids must run 1, 2, ...");
    }
    if (!parse_index(cols[6], head)) {
      throw ValidationError("HEAD", "line " + std::to_string(lineno) + ": HEAD '" + std::string(cols[6]) +
                                        "' is not an index");
    }
    sentence.heads.push_back(head);
  }
  flush();
  if (docs.size() > 1 && docs.front().parsed.sentences.empty() && docs.front().id.empty()) docs.erase(docs.begin());
  return docs;
}

ParsedCn parse_conllu(std::string_view conllu) {
  ParsedCn out;
  for (auto& d : parse_conllu_documents(conllu)) {
    out.sentences.insert(out.sentences.end(), d.parsed.sentences.begin(), d.parsed.sentences.end());
  }
  return out;
}

SyntacticReport syntactic_metrics(const ParsedCn& parsed) {
  if (parsed.sentences.empty()) throw ValidationError("sentences", "no sentences to measure");
  SyntacticReport rep;
  double depth_sum = 0.0;
  for (const auto& tree : parsed.sentences) {
    const std::size_t n = tree.heads.size();
    if (std::count(tree.heads.begin(), tree.heads.end(), std::size_t{0}) != 1) {
      throw ValidationError("HEAD", "dependency tree must have exactly one root");
    }
    std::size_t sentence_depth = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t depth = 0;
      std::size_t node = i + 1;
      while (tree.heads[node - 1] != 0) {
        node = tree.heads[node - 1];
        if (node == 0 || node > n) throw ValidationError("HEAD", "head index out of range");
        if (++depth > n) throw ValidationError("HEAD", "dependency tree contains a cycle");
      }
      sentence_depth = std::max(sentence_depth, depth);
    }
    rep.msd = std::max(rep.msd, sentence_depth);
    depth_sum += static_cast<double>(sentence_depth);
  }
  rep.nst = parsed.sentences.size();
  rep.asd = depth_sum / static_cast<double>(rep.nst);
  return rep;
}

MetricVector score_candidate(const TokenSeq& candidate, const TokenSeq& reference) {
  if (reference.empty()) throw ValidationError("reference", "reference is empty");
  if (candidate.empty()) return {};
  return {rouge_l(candidate, reference), bleu_n(candidate, reference, 1), bleu_n(candidate, reference, 3),
          bleu_n(candidate, reference, 4)};
}

std::vector<MetricVector> score_candidates(const std::vector<std::string>& candidates, std::string_view reference) {
  const auto ref = text::tokenize(reference);
  std::vector<MetricVector> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score_candidate(text::tokenize(c), ref));
  return out;
}

}  // namespace cnkit::metrics
