// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <system_error>

namespace cnkit::testing {

using corpus::DatasetRecord;
using corpus::Split;
using corpus::TargetLabel;

std::string random_sentence(Rng& rng, const std::string& prefix, std::size_t vocab, std::size_t min_len,
                            std::size_t max_len) {
  const std::size_t len = min_len + rng.below(max_len - min_len + 1);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) s += ' ';
    s += prefix + std::to_string(rng.below(vocab));
  }
  return s;
}

namespace {

std::string lower_name(TargetLabel t) {
  std::string s(corpus::to_string(t));
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c == '+') c = 'p';
  }
  return s;
}

std::string record_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "r%05zu", i);
  return buf;
}

}  // namespace

std::vector<DatasetRecord> synthetic_dataset(const SyntheticOptions& opts) {
  Rng rng(opts.seed);
  // Uneven target mix, loosely shaped like a real collection.
  const std::vector<std::pair<TargetLabel, double>> mix = {
      {TargetLabel::Muslims, 0.24}, {TargetLabel::Migrants, 0.18}, {TargetLabel::Women, 0.13},
      {TargetLabel::Lgbt, 0.12},    {TargetLabel::Jews, 0.11},     {TargetLabel::Poc, 0.08},
      {TargetLabel::Other, 0.08},   {TargetLabel::Disabled, 0.06}};
  std::vector<DatasetRecord> out;
  out.reserve(opts.records);
  const auto duplicates = static_cast<std::size_t>(std::round(opts.duplicate_share * opts.records));
  for (std::size_t i = 0; i < opts.records; ++i) {
    double u = rng.uniform01();
    TargetLabel t = mix.back().first;
    for (const auto& [label, share] : mix) {
      if (u < share) {
        t = label;
        break;
      }
      u -= share;
    }
    DatasetRecord r;
    r.id = record_id(i);
    r.targets = {t};
    if (rng.uniform01() < opts.multi_target_share) {
      const auto second = corpus::kAllTargets[rng.below(corpus::kAllTargets.size())];
      if (second != t) r.targets.push_back(second);
    }
    const auto name = lower_name(t);
    r.hs = name + " hs " + std::to_string(i) + " " + random_sentence(rng, name, 30, 3, 9);
    r.cn = random_sentence(rng, "c" + name, 40, 4, 14);
    out.push_back(std::move(r));
  }
  // Re-use earlier HS texts for the last `duplicates` records; each keeps
  // its own CN and takes the targets of the record it copies.
  for (std::size_t k = 0; k < duplicates && k < out.size() / 2; ++k) {
    auto& dup = out[out.size() - 1 - k];
    const auto& src = out[rng.below(out.size() / 2)];
    dup.hs = src.hs;
    dup.targets = src.targets;
  }
  return out;
}

std::vector<DatasetRecord> published_shape_dataset() {
  Rng rng(20211);
  std::vector<DatasetRecord> out;
  std::size_t next = 0;
  auto add = [&](std::vector<TargetLabel> targets) {
    DatasetRecord r;
    r.id = record_id(next);
    const auto name = lower_name(targets.front());
    r.hs = name + " hs " + std::to_string(next) + " " + random_sentence(rng, name, 50, 4, 10);
    r.cn = random_sentence(rng, "c" + name, 80, 6, 16);
    r.targets = std::move(targets);
    out.push_back(std::move(r));
    ++next;
  };
  const std::vector<std::pair<TargetLabel, std::size_t>> single = {
      {TargetLabel::Jews, 594},   {TargetLabel::Lgbt, 617}, {TargetLabel::Migrants, 957},
      {TargetLabel::Muslims, 1335}, {TargetLabel::Women, 662}, {TargetLabel::Disabled, 220},
      {TargetLabel::Poc, 352},    {TargetLabel::Other, 157}};
  for (const auto& [t, n] : single) {
    for (std::size_t i = 0; i < n; ++i) add({t});
  }
  const std::vector<std::pair<TargetLabel, std::size_t>> with_other = {
      {TargetLabel::Jews, 20}, {TargetLabel::Lgbt, 22}, {TargetLabel::Migrants, 22},
      {TargetLabel::Muslims, 22}, {TargetLabel::Women, 23}};
  for (const auto& [t, n] : with_other) {
    for (std::size_t i = 0; i < n; ++i) add({TargetLabel::Other, t});
  }
  return out;
}

std::vector<corpus::ApeTriplet> published_shape_triplets(const std::vector<DatasetRecord>& split_records) {
  struct Plan {
    std::size_t zero;      // cn_or == cn_pe, no intermediate edit: no pair
    std::size_t two;       // distinct intermediate edit: two pairs
    std::size_t star_pe;   // intermediate edit equal to cn_pe: dropped, one pair
    std::size_t star_or;   // intermediate edit equal to cn_or: deduplicated, one pair
  };
  const std::map<Split, Plan> plans = {
      {Split::Train, {100, 282, 40, 40}}, {Split::Val, {20, 88, 10, 10}}, {Split::Test, {20, 116, 10, 10}}};
  std::map<Split, std::size_t> seen;
  std::vector<corpus::ApeTriplet> out;
  Rng rng(6006);
  for (const auto& r : split_records) {
    if (!r.split) throw std::invalid_argument("published_shape_triplets needs split records");
    const auto& plan = plans.at(*r.split);
    const std::size_t j = seen[*r.split]++;
    corpus::ApeTriplet t;
    t.id = "t" + r.id;
    t.hs = r.hs;
    t.cn_or = random_sentence(rng, "g", 90, 6, 14);
    if (j < plan.zero) {
      t.cn_pe = t.cn_or;
    } else {
      t.cn_pe = t.cn_or + " evidence";
      const std::size_t k = j - plan.zero;
      if (k < plan.two) {
        t.cn_pe_star = t.cn_or + " facts";
      } else if (k < plan.two + plan.star_pe) {
        t.cn_pe_star = t.cn_pe;
      } else if (k < plan.two + plan.star_pe + plan.star_or) {
        t.cn_pe_star = t.cn_or;
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

ToyLm::ToyLm(std::size_t words, std::uint64_t seed, double peak) : seed_(seed), peak_(peak) {
  std::vector<std::string> tokens{std::string(lm::kBos), std::string(lm::kEos), std::string(lm::kUnk)};
  for (std::size_t i = 0; i < words; ++i) tokens.push_back("w" + std::to_string(i));
  vocab_ = lm::Vocabulary::from_tokens(std::move(tokens));
}

lm::Distribution ToyLm::next_distribution(std::span<const lm::TokenId> context) const {
  lm::check_context(vocab_, context);
  std::uint64_t h = seed_;
  for (auto id : context) h = derive_seed(h, id);
  Rng rng(derive_seed(h, context.size()));
  std::vector<double> w(vocab_.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i == vocab_.bos()) continue;
    w[i] = std::pow(0.02 + rng.uniform01(), peak_);
  }
  return lm::Distribution::normalized(std::move(w));
}

std::vector<double> random_probs(Rng& rng, std::size_t size, std::size_t zeros) {
  std::vector<double> w(size);
  for (auto& x : w) x = 0.01 + rng.uniform01();
  if (zeros >= size) zeros = size - 1;
  for (std::size_t z = 0; z < zeros;) {
    const auto i = rng.below(size);
    if (w[i] != 0.0) {
      w[i] = 0.0;
      ++z;
    }
  }
  double sum = 0.0;
  for (double x : w) sum += x;
  for (auto& x : w) x /= sum;
  return w;
}

std::vector<selection::Winner> best_lm_winners(std::size_t hs_count, const std::vector<std::string>& models,
                                               const std::vector<std::string>& decodings,
                                               std::map<std::string, std::string>& hs_text, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<selection::Winner> out;
  for (std::size_t i = 0; i < hs_count; ++i) {
    const std::string hs_id = "hs" + std::to_string(i);
    hs_text[hs_id] = random_sentence(rng, "h", 40, 5, 10);
    for (const auto& m : models) {
      selection::Winner w;
      w.hs_id = hs_id;
      w.group = m;
      w.model_id = m;
      w.decoding_id = decodings[rng.below(decodings.size())];
      w.text = random_sentence(rng, "c", 40, 6, 12);
      out.push_back(std::move(w));
    }
  }
  return out;
}

TempDir::TempDir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "cnkit-test-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw std::system_error(errno, std::generic_category(), "mkdtemp");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace cnkit::testing
