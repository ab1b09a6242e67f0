// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>

#include "cnkit/error.hpp"

namespace cnkit::experiments {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("y", "pearson inputs differ in length");
  if (x.size() < 2) throw ValidationError("x", "pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ConstraintError("pearson: x has zero variance");
  if (syy == 0.0) throw ConstraintError("pearson: y has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

LotoFold make_fold(const corpus::LotoSplit& split, TargetLabel left_out, std::span<const TargetLabel> subset_targets) {
  LotoFold fold;
  fold.left_out = left_out;
  for (TargetLabel t : subset_targets) {
    if (t == left_out) continue;
    auto& subset = fold.train_subsets[t];
    for (const auto& r : split.train) {
      if (r.has_target(t)) subset.push_back(text::tokenize(r.cn));
    }
  }
  for (const auto& r : split.test) fold.test_references.push_back(text::tokenize(r.cn));
  return fold;
}

std::optional<double> InfluenceMatrix::at(TargetLabel row, TargetLabel column) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == rows.end() || c == columns.end()) return std::nullopt;
  return values[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - columns.begin())];
}

TargetLabel InfluenceMatrix::most_influential(TargetLabel column) const {
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (c == columns.end()) throw ValidationError("column", "no column for " + std::string(corpus::to_string(column)));
  const auto ci = static_cast<std::size_t>(c - columns.begin());
  std::optional<std::size_t> best;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& v = values[r][ci];
    if (v && (!best || *v < *values[*best][ci])) best = r;
  }
  if (!best) throw ConstraintError("column " + std::string(corpus::to_string(column)) + " has no defined entries");
  return rows[*best];
}

InfluenceMatrix influence_matrix(const std::vector<LotoFold>& folds, std::span<const TargetLabel> rows) {
  if (folds.size() < 2) throw ValidationError("folds", "influence matrix needs at least two targets");
  InfluenceMatrix m;
  m.rows.assign(rows.begin(), rows.end());
  for (const auto& f : folds) m.columns.push_back(f.left_out);
  m.values.assign(m.rows.size(), std::vector<std::optional<double>>(folds.size()));
  for (std::size_t c = 0; c < folds.size(); ++c) {
    const auto& fold = folds[c];
    if (fold.test_references.empty()) {
      throw ValidationError("test_references", "no test references for " + std::string(corpus::to_string(fold.left_out)));
    }
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      const TargetLabel row = m.rows[r];
      if (row == fold.left_out) continue;
      const auto it = fold.train_subsets.find(row);
      if (it == fold.train_subsets.end() || it->second.empty()) {
        throw ValidationError("train_subsets", "empty training subset " + std::string(corpus::to_string(row)) +
                                                   " in fold " + std::string(corpus::to_string(fold.left_out)));
      }
      m.values[r][c] = metrics::novelty(fold.test_references, it->second);
    }
  }
  return m;
}

std::string influence_tsv(const InfluenceMatrix& m) {
  std::string out = "train\\test";
  for (TargetLabel c : m.columns) {
    out += '\t';
    out += corpus::to_string(c);
  }
  out += '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    out += corpus::to_string(m.rows[r]);
    for (const auto& v : m.values[r]) {
      if (v) {
        std::snprintf(buf, sizeof buf, "\t%.3f", *v);
        out += buf;
      } else {
        out += "\t-";
      }
    }
    out += '\n';
  }
  return out;
}

std::vector<NamedDecoding> LotoRunConfig::default_decodings(std::uint64_t seed) {
  decoding::DecodingConfig topk;
  topk.method = decoding::Method::TopK;
  topk.seed = seed;
  decoding::DecodingConfig bs;
  bs.method = decoding::Method::BeamSearch;
  bs.seed = seed;
  return {{"topk", topk}, {"bs", bs}};
}

ProviderFactory ngram_factory(std::size_t order) {
  return [order](const std::vector<DatasetRecord>& train) -> std::shared_ptr<const lm::LanguageModel> {
    std::vector<TokenSeq> seqs;
    seqs.reserve(train.size());
    for (const auto& r : train) seqs.push_back(decoding::conditioned_sequence(r.hs, r.cn));
    return std::make_shared<lm::NgramLm>(lm::train_ngram(seqs, order));
  };
}

namespace {

constexpr const char* kMetricNames[] = {"ROU", "B-1", "B-3", "B-4"};

struct FoldWork {
  TargetOutcome outcome;
  LotoFold fold;
  std::vector<TokenSeq> train_cns;
  std::vector<std::vector<TargetLabel>> train_targets;
  std::vector<std::vector<double>> candidate_nov;  // per decoding, per item
  std::vector<double> reference_nov_full;          // per item
};

FoldWork run_fold(const std::vector<DatasetRecord>& dataset, const ProviderFactory& factory,
                  const LotoRunConfig& config, TargetLabel target) {
  FoldWork w;
  corpus::LotoConfig lc = config.loto;
  lc.left_out = target;
  const auto split = corpus::build_loto(dataset, lc);
  auto model = factory(split.train);
  if (!model) throw ConfigError("provider factory returned no model");

  std::vector<DatasetRecord> test = split.test;
  if (config.max_test_items > 0 && test.size() > config.max_test_items) test.resize(config.max_test_items);

  for (const auto& r : split.train) {
    w.train_cns.push_back(text::tokenize(r.cn));
    w.train_targets.push_back(r.targets);
  }
  std::vector<TokenSeq> refs;
  for (const auto& r : test) refs.push_back(text::tokenize(r.cn));

  w.outcome.target = target;
  w.outcome.train_size = split.train.size();
  w.outcome.test_size = test.size();

  const std::string model_id = "lm-" + std::string(corpus::to_string(target));
  for (const auto& d : config.decodings) {
    std::vector<selection::CandidateCell> cells;
    cells.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      decoding::DecodingConfig dc = d.config;
      dc.seed = derive_seed(d.config.seed, i);
      const auto results = decoding::generate_candidates(*model, test[i].hs, dc, config.candidates);
      selection::CandidateCell cell{test[i].id, model_id, d.id, {}};
      for (const auto& g : results) {
        const std::string text = decoding::candidate_text(model->vocabulary(), g);
        cell.candidates.push_back({text, metrics::score_candidate(text::tokenize(text), refs[i])});
      }
      cells.push_back(std::move(cell));
    }
    DecodingOutcome out;
    out.decoding_id = d.id;
    out.winners = selection::select_best(cells, selection::GroupBy::ModelDecoding);
    out.row = selection::corpus_report(out.winners, w.train_cns, config.rr).front();
    out.row.group = std::string(corpus::to_string(target));
    std::vector<TokenSeq> texts;
    for (const auto& win : out.winners) texts.push_back(text::tokenize(win.text));
    w.candidate_nov.push_back(metrics::novelty_per_item(texts, w.train_cns));
    w.outcome.decodings.push_back(std::move(out));
  }

  w.outcome.reference_rr = metrics::repetition_rate(refs, config.rr);
  w.reference_nov_full = metrics::novelty_per_item(refs, w.train_cns);
  std::vector<TargetLabel> rows(config.loto.loto_targets.begin(), config.loto.loto_targets.end());
  w.fold = make_fold(split, target, rows);
  w.fold.test_references = refs;
  return w;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

CorrelationReport correlate(std::span<const double> nov_influential, std::span<const double> nov_without,
                            std::span<const metrics::MetricVector> overlap) {
  CorrelationReport rep;
  double sum_with = 0.0;
  double sum_without = 0.0;
  for (std::size_t m = 0; m < selection::kRankedMetrics; ++m) {
    std::vector<double> y;
    y.reserve(overlap.size());
    for (const auto& v : overlap) y.push_back(selection::ranked_values(v)[m]);
    try {
      CorrelationEntry e{kMetricNames[m], pearson(nov_influential, y), pearson(nov_without, y)};
      sum_with += e.r_with_influential;
      sum_without += e.r_without_influential;
      rep.overlap.push_back(std::move(e));
    } catch (const ConstraintError&) {
      // undefined for this metric (constant column)
    }
  }
  if (rep.overlap.empty()) throw ConstraintError("no overlap metric has a defined correlation");
  rep.mean_r_with = sum_with / static_cast<double>(rep.overlap.size());
  rep.mean_r_without = sum_without / static_cast<double>(rep.overlap.size());
  return rep;
}

nlohmann::json to_json(const CorrelationReport& r) {
  nlohmann::json overlap = nlohmann::json::array();
  for (const auto& e : r.overlap) {
    overlap.push_back({{"metric", e.metric}, {"r_with_influential", e.r_with_influential},
                       {"r_without_influential", e.r_without_influential}});
  }
  nlohmann::json nov = nlohmann::json::object();
  for (const auto& [id, v] : r.novelty_by_decoding) nov[id] = v;
  return {{"points", r.points == CorrelationPoints::PerTarget ? "per-target" : "per-cn"},
          {"overlap", overlap},
          {"mean_r_with_influential", r.mean_r_with},
          {"mean_r_without_influential", r.mean_r_without},
          {"reference_vs_candidate_novelty", nov}};
}

LotoReport loto_run(const std::vector<DatasetRecord>& dataset, const ProviderFactory& factory,
                    const LotoRunConfig& config) {
  if (config.targets.size() < 2) throw ValidationError("targets", "LOTO needs at least two targets");
  if (config.decodings.empty()) throw ValidationError("decodings", "no decoding configuration given");
  for (const auto& d : config.decodings) d.config.validate();

  std::vector<FoldWork> work;
  if (config.parallel) {
    std::vector<std::future<FoldWork>> futures;
    for (TargetLabel t : config.targets) {
      futures.push_back(std::async(std::launch::async, run_fold, std::cref(dataset), std::cref(factory),
                                   std::cref(config), t));
    }
    for (auto& f : futures) work.push_back(f.get());
  } else {
    for (TargetLabel t : config.targets) work.push_back(run_fold(dataset, factory, config, t));
  }

  LotoReport rep;
  std::vector<LotoFold> folds;
  for (const auto& w : work) folds.push_back(w.fold);
  std::vector<TargetLabel> rows(config.loto.loto_targets.begin(), config.loto.loto_targets.end());
  rep.influence = influence_matrix(folds, rows);

  std::vector<double> x_with;
  std::vector<double> x_without;
  std::vector<metrics::MetricVector> y;
  std::vector<double> ref_full;
  std::vector<std::vector<double>> cand_nov(config.decodings.size());
  for (auto& w : work) {
    auto& o = w.outcome;
    o.most_influential = rep.influence.most_influential(o.target);
    const auto& influential = w.fold.train_subsets.at(o.most_influential);
    std::vector<TokenSeq> rest;
    for (std::size_t i = 0; i < w.train_cns.size(); ++i) {
      const auto& ts = w.train_targets[i];
      if (std::find(ts.begin(), ts.end(), o.most_influential) == ts.end()) rest.push_back(w.train_cns[i]);
    }
    const auto& refs = w.fold.test_references;
    o.per_cn_nov_influential = metrics::novelty_per_item(refs, influential);
    o.per_cn_nov_without = rest.empty() ? std::vector<double>(refs.size(), 1.0) : metrics::novelty_per_item(refs, rest);
    o.reference_nov_influential = mean(o.per_cn_nov_influential);
    o.reference_nov_without = mean(o.per_cn_nov_without);
    o.reference_nov_full = mean(w.reference_nov_full);

    const auto& primary = o.decodings.front();
    if (config.points == CorrelationPoints::PerTarget) {
      x_with.push_back(o.reference_nov_influential);
      x_without.push_back(o.reference_nov_without);
      y.push_back(primary.row.mean);
      ref_full.push_back(o.reference_nov_full);
      for (std::size_t d = 0; d < o.decodings.size(); ++d) cand_nov[d].push_back(o.decodings[d].row.diversity.nov);
    } else {
      x_with.insert(x_with.end(), o.per_cn_nov_influential.begin(), o.per_cn_nov_influential.end());
      x_without.insert(x_without.end(), o.per_cn_nov_without.begin(), o.per_cn_nov_without.end());
      for (const auto& win : primary.winners) y.push_back(win.metrics);
      ref_full.insert(ref_full.end(), w.reference_nov_full.begin(), w.reference_nov_full.end());
      for (std::size_t d = 0; d < o.decodings.size(); ++d) {
        cand_nov[d].insert(cand_nov[d].end(), w.candidate_nov[d].begin(), w.candidate_nov[d].end());
      }
    }
    rep.targets.push_back(std::move(o));
  }
  try {
    rep.correlations = correlate(x_with, x_without, y);
  } catch (const ConstraintError&) {
    // constant overlap across targets: every r is undefined
    rep.correlations.mean_r_with = std::nan("");
    rep.correlations.mean_r_without = std::nan("");
  }
  rep.correlations.points = config.points;
  for (std::size_t d = 0; d < config.decodings.size(); ++d) {
    try {
      rep.correlations.novelty_by_decoding.emplace_back(config.decodings[d].id, pearson(ref_full, cand_nov[d]));
    } catch (const ConstraintError&) {
      // constant candidate novelty: correlation undefined, omitted
    }
  }
  return rep;
}

std::string overlap_tsv(const LotoReport& r) {
  std::vector<selection::ReportRow> rows;
  for (const auto& t : r.targets) rows.push_back(t.decodings.front().row);
  return selection::report_tsv(rows, "target");
}

std::string repetition_tsv(const LotoReport& r) {
  std::string out = "target";
  if (!r.targets.empty()) {
    for (const auto& d : r.targets.front().decodings) out += "\tRR_" + d.decoding_id;
  }
  out += "\tRR_reference\n";
  char buf[32];
  for (const auto& t : r.targets) {
    out += corpus::to_string(t.target);
    for (const auto& d : t.decodings) {
      std::snprintf(buf, sizeof buf, "\t%.3f", d.row.diversity.rr);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.3f\n", t.reference_rr);
    out += buf;
  }
  return out;
}

std::string scatter_csv(const LotoReport& r) {
  std::string out = "plot,series,target,x,y\n";
  char buf[160];
  for (const auto& t : r.targets) {
    const std::string target(corpus::to_string(t.target));
    const auto& m = t.decodings.front().row.mean;
    const auto vals = selection::ranked_values(m);
    for (std::size_t k = 0; k < selection::kRankedMetrics; ++k) {
      std::snprintf(buf, sizeof buf, "%s,with_influential,%s,%.6f,%.6f\n", kMetricNames[k], target.c_str(),
                    t.reference_nov_influential, vals[k]);
      out += buf;
      std::snprintf(buf, sizeof buf, "%s,without_influential,%s,%.6f,%.6f\n", kMetricNames[k], target.c_str(),
                    t.reference_nov_without, vals[k]);
      out += buf;
    }
    for (const auto& d : t.decodings) {
      std::snprintf(buf, sizeof buf, "NOV,%s,%s,%.6f,%.6f\n", d.decoding_id.c_str(), target.c_str(),
                    t.reference_nov_full, d.row.diversity.nov);
      out += buf;
    }
  }
  return out;
}

}  // namespace cnkit::experiments
