// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic data shared by the unit and acceptance suites.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cnkit/corpus.hpp"
#include "cnkit/langmodel.hpp"
#include "cnkit/rng.hpp"
#include "cnkit/selection.hpp"

namespace cnkit::testing {

// Records with every target present, some multi-target rows and a share of
// HS texts that occur more than once (each duplicate gets its own CN).
struct SyntheticOptions {
  std::size_t records = 600;
  double duplicate_share = 0.05;
  double multi_target_share = 0.08;
  std::uint64_t seed = 1;
};
std::vector<corpus::DatasetRecord> synthetic_dataset(const SyntheticOptions& opts);

// Random sentence over a vocabulary prefix ("<prefix>3 <prefix>17 ...").
std::string random_sentence(Rng& rng, const std::string& prefix, std::size_t vocab, std::size_t min_len,
                            std::size_t max_len);

// 5003 records laid out with the per-target counts of the published
// dataset: 594 JEWS, 617 LGBT+, 957 MIGRANTS, 1335 MUSLIMS, 662 WOMEN, 220
// DISABLED, 352 POC and 266 OTHER, of which 109 carry a second LOTO target.
// Twenty of those pair OTHER with JEWS, which lifts the JEWS pool to 614.
std::vector<corpus::DatasetRecord> published_shape_dataset();

// Post-editing triplets over an already split dataset, one per record,
// arranged so that the pairs come out as 4185 train / 568 val / 596 test.
// Includes intermediate edits equal to the final edit (TER 0) and to the
// original (deduplicated) so the filters have something to do.
std::vector<corpus::ApeTriplet> published_shape_triplets(const std::vector<corpus::DatasetRecord>& split_records);

// Language model whose distributions are a seeded pure function of the
// context. Vocabulary is <bos> <eos> <unk> followed by `words` plain tokens;
// BOS never receives mass, every other entry does.
class ToyLm final : public lm::LanguageModel {
 public:
  ToyLm(std::size_t words, std::uint64_t seed, double peak = 1.0);
  const lm::Vocabulary& vocabulary() const override { return vocab_; }
  lm::Distribution next_distribution(std::span<const lm::TokenId> context) const override;

 private:
  lm::Vocabulary vocab_;
  std::uint64_t seed_;
  double peak_;
};

// Random probability vector of the given size; `zeros` entries are forced
// to zero mass (never all of them).
std::vector<double> random_probs(Rng& rng, std::size_t size, std::size_t zeros = 0);

// Best_LM style winners: one per (hs, model) for `hs_count` HS ids
// "hs<i>", with the decoding drawn from `decodings`. Also fills `hs_text`.
std::vector<selection::Winner> best_lm_winners(std::size_t hs_count, const std::vector<std::string>& models,
                                               const std::vector<std::string>& decodings,
                                               std::map<std::string, std::string>& hs_text, std::uint64_t seed = 1);

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cnkit::testing
