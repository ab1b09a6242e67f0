// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cnkit::corpus {

enum class TargetLabel { Disabled, Jews, Lgbt, Migrants, Muslims, Poc, Women, Other };

inline constexpr std::array<TargetLabel, 8> kAllTargets = {
    TargetLabel::Disabled, TargetLabel::Jews, TargetLabel::Lgbt,  TargetLabel::Migrants,
    TargetLabel::Muslims,  TargetLabel::Poc,  TargetLabel::Women, TargetLabel::Other};

// Targets that can be held out in leave-one-target-out experiments.
inline constexpr std::array<TargetLabel, 5> kLotoTargets = {
    TargetLabel::Jews, TargetLabel::Lgbt, TargetLabel::Migrants, TargetLabel::Muslims, TargetLabel::Women};

std::string_view to_string(TargetLabel t);
// Case-insensitive. Throws ValidationError("targets") on anything else.
TargetLabel parse_target(std::string_view s);

enum class Split { Train, Val, Test };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Val, Split::Test};

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct DatasetRecord {
  std::string id;
  std::string hs;
  std::string cn;
  std::vector<TargetLabel> targets;
  std::optional<Split> split;

  bool has_target(TargetLabel t) const;
  TargetLabel primary_target() const { return targets.front(); }
};

// Throws ValidationError naming the offending field.
void validate(const DatasetRecord& r);

nlohmann::json to_json(const DatasetRecord& r);
DatasetRecord record_from_json(const nlohmann::json& j);

enum class DatasetFormat { Jsonl, Csv };

// Picks the format from the file extension (.csv, anything else is JSONL).
DatasetFormat format_for(const std::filesystem::path& path);

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, DatasetFormat format);
std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path);

// Parses the fixed CSV schema: header id,hs,cn,targets,split.
std::vector<DatasetRecord> parse_csv_dataset(std::string_view contents, std::string_view source = "<csv>");

std::string dataset_to_jsonl(const std::vector<DatasetRecord>& records);

// Identity of an HS for the no-repetition constraint: exact match after NFC.
std::string hs_key(std::string_view hs);

struct SplitSpec {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  double target_tolerance = 0.02;

  void validate() const;
};

// Largest-remainder rounding of n into the three split sizes.
std::array<std::size_t, 3> split_quotas(std::size_t n, const std::array<double, 3>& ratios);

// Generic grouped, stratified partition. Items sharing a key always land in
// the same split; a group's stratum is the stratum of its first item.
std::vector<Split> partition_by_key(const std::vector<std::string>& keys, const std::vector<int>& strata,
                                    const SplitSpec& spec);

// Assigns TRAIN/VAL/TEST to every record. Records must be unsplit.
std::vector<DatasetRecord> split_dataset(std::vector<DatasetRecord> records, const SplitSpec& spec);

struct SplitAudit {
  std::array<std::size_t, 3> sizes{};
  std::array<std::size_t, 3> quotas{};
  std::size_t max_size_deviation = 0;
  std::size_t cross_split_hs = 0;  // hs keys seen in more than one split
  double max_target_deviation = 0.0;
};

SplitAudit audit_split(const std::vector<DatasetRecord>& records, const SplitSpec& spec);

struct LotoConfig {
  TargetLabel left_out = TargetLabel::Jews;
  std::size_t per_target_quota = 600;
  std::set<TargetLabel> always_in_train{TargetLabel::Poc, TargetLabel::Disabled};
  std::set<TargetLabel> loto_targets{kLotoTargets.begin(), kLotoTargets.end()};
  std::uint64_t seed = 0;

  void validate() const;
};

struct LotoSplit {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> test;
  // Records drawn into the pool, keyed by the target they were drawn for.
  std::map<TargetLabel, std::size_t> pool_counts;

  std::size_t pool_size() const { return train.size() + test.size(); }
};

LotoSplit build_loto(const std::vector<DatasetRecord>& records, const LotoConfig& config);

struct ApeTriplet {
  std::string id;
  std::string hs;
  std::string cn_or;
  std::optional<std::string> cn_pe_star;
  std::string cn_pe;
};

void validate(const ApeTriplet& t);
ApeTriplet triplet_from_json(const nlohmann::json& j);
std::vector<ApeTriplet> load_ape_triplets(const std::filesystem::path& path);

enum class ApeSource { Original, IntermediateEdit };
std::string_view to_string(ApeSource s);

struct ApePair {
  std::string id;
  std::string hs;
  std::string source_cn;
  std::string cn_pe;
  ApeSource source = ApeSource::Original;
  Split split = Split::Train;
  double ter = 0.0;
};

nlohmann::json to_json(const ApePair& p);

struct ApeCorpus {
  std::vector<ApePair> pairs;
  std::size_t dropped_zero_ter = 0;

  std::array<std::size_t, 3> counts() const;
};

using TerFn = std::function<double(std::string_view candidate, std::string_view reference)>;

// TER over the shared tokenizer; the default scorer for APE filtering.
double text_ter(std::string_view candidate, std::string_view reference);

// ter_fn may be called from several threads at once.

// Partition computed with the split machinery, keyed on hs.
ApeCorpus build_ape_corpus(const std::vector<ApeTriplet>& triplets, const TerFn& ter_fn, const SplitSpec& spec);

// Partition inherited from an already-split dataset (hs_key -> split). Every
// triplet hs must be present.
ApeCorpus build_ape_corpus(const std::vector<ApeTriplet>& triplets, const TerFn& ter_fn,
                           const std::map<std::string, Split>& hs_partition);

std::map<std::string, Split> hs_partition_of(const std::vector<DatasetRecord>& split_records);

}  // namespace cnkit::corpus
