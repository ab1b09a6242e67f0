// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

// split, loto, ape-prep, ape-pairs

#include <memory>
#include <ostream>

#include "cnkit/corpus.hpp"
#include "cnkit/error.hpp"
#include "cnkit/humaneval.hpp"
#include "cnkit/io.hpp"
#include "commands.hpp"

namespace cnkit::cli {

namespace {

std::array<double, 3> ratios_from(const std::string& s) {
  const auto v = parse_ratio_list(s, "ratios");
  if (v.size() != 3) throw ValidationError("ratios", "--ratios needs three values, e.g. 8,1,1");
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) throw ValidationError("ratios", "--ratios values must be non-negative");
    sum += x;
  }
  if (!(sum > 0.0)) throw ValidationError("ratios", "--ratios must not all be zero");
  return {v[0] / sum, v[1] / sum, v[2] / sum};
}

struct SplitOpts {
  std::string in;
  std::string ratios = "8,1,1";
  std::uint64_t seed = 0;
  double tolerance = 0.02;
  std::string out_dir;
  std::string manifest;
};

int cmd_split(const SplitOpts& o, Context& ctx) {
  corpus::SplitSpec spec;
  spec.ratios = ratios_from(o.ratios);
  spec.seed = o.seed;
  spec.target_tolerance = o.tolerance;
  spec.validate();
  auto records = corpus::load_dataset(o.in);
  for (auto& r : records) r.split.reset();
  const auto split = corpus::split_dataset(std::move(records), spec);
  const auto audit = corpus::audit_split(split, spec);

  RunManifest m("split", ctx.argv);
  m.add_input(o.in);
  m.config() = {{"ratios", spec.ratios}, {"target_tolerance", spec.target_tolerance}};
  m.seeds()["split"] = spec.seed;
  const std::filesystem::path dir = o.out_dir;
  for (auto s : corpus::kSplits) {
    std::vector<corpus::DatasetRecord> part;
    for (const auto& r : split) {
      if (r.split == s) part.push_back(r);
    }
    const auto path = dir / (std::string(corpus::to_string(s)) + ".jsonl");
    write_records(path, part);
    m.add_output(path);
    m.results()["sizes"][std::string(corpus::to_string(s))] = part.size();
  }
  m.results()["max_size_deviation"] = audit.max_size_deviation;
  m.results()["cross_split_hs"] = audit.cross_split_hs;
  m.results()["max_target_deviation"] = audit.max_target_deviation;
  m.write(manifest_path_for(o.manifest, dir, true));
  ctx.out << "split: train " << audit.sizes[0] << ", val " << audit.sizes[1] << ", test " << audit.sizes[2]
          << " (max target deviation " << audit.max_target_deviation << ")\n";
  return 0;
}

struct LotoOpts {
  std::string in;
  std::string leave_out;
  std::size_t quota = 600;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string manifest;
};

int cmd_loto(const LotoOpts& o, Context& ctx) {
  corpus::LotoConfig cfg;
  try {
    cfg.left_out = corpus::parse_target(o.leave_out);
  } catch (const ValidationError& e) {
    throw ValidationError("leave-out", std::string("--leave-out: ") + e.what());
  }
  cfg.per_target_quota = o.quota;
  cfg.seed = o.seed;
  const auto records = corpus::load_dataset(o.in);
  const auto split = corpus::build_loto(records, cfg);

  RunManifest m("loto", ctx.argv);
  m.add_input(o.in);
  m.config() = {{"leave_out", std::string(corpus::to_string(cfg.left_out))}, {"per_target_quota", cfg.per_target_quota}};
  m.seeds()["loto"] = cfg.seed;
  const std::filesystem::path dir = o.out_dir;
  write_records(dir / "train.jsonl", split.train);
  write_records(dir / "test.jsonl", split.test);
  m.add_output(dir / "train.jsonl");
  m.add_output(dir / "test.jsonl");
  for (const auto& [t, n] : split.pool_counts) m.results()["pool_counts"][std::string(corpus::to_string(t))] = n;
  m.results()["pool_size"] = split.pool_size();
  m.results()["train"] = split.train.size();
  m.results()["test"] = split.test.size();
  m.write(manifest_path_for(o.manifest, dir, true));
  ctx.out << "loto: left out " << corpus::to_string(cfg.left_out) << ", pool " << split.pool_size() << ", train "
          << split.train.size() << ", test " << split.test.size() << "\n";
  return 0;
}

struct ApePrepOpts {
  std::string triplets;
  std::vector<std::string> dataset;
  std::string ratios = "8,1,1";
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string manifest;
};

int cmd_ape_prep(const ApePrepOpts& o, Context& ctx) {
  const auto triplets = corpus::load_ape_triplets(o.triplets);
  RunManifest m("ape-prep", ctx.argv);
  m.add_input(o.triplets);
  corpus::ApeCorpus ape;
  if (!o.dataset.empty()) {
    std::vector<corpus::DatasetRecord> records;
    for (const auto& p : o.dataset) {
      auto part = corpus::load_dataset(p);
      records.insert(records.end(), part.begin(), part.end());
      m.add_input(p);
    }
    ape = corpus::build_ape_corpus(triplets, corpus::text_ter, corpus::hs_partition_of(records));
    m.config()["partition"] = "dataset";
  } else {
    corpus::SplitSpec spec;
    spec.ratios = ratios_from(o.ratios);
    spec.seed = o.seed;
    ape = corpus::build_ape_corpus(triplets, corpus::text_ter, spec);
    m.config()["partition"] = "split";
    m.config()["ratios"] = spec.ratios;
    m.seeds()["split"] = spec.seed;
  }
  const std::filesystem::path dir = o.out_dir;
  for (auto s : corpus::kSplits) {
    std::vector<nlohmann::json> rows;
    for (const auto& p : ape.pairs) {
      if (p.split == s) rows.push_back(corpus::to_json(p));
    }
    const auto path = dir / ("ape_" + std::string(corpus::to_string(s)) + ".jsonl");
    write_jsonl(path, rows);
    m.add_output(path);
  }
  const auto counts = ape.counts();
  m.results()["counts"] = {{"train", counts[0]}, {"val", counts[1]}, {"test", counts[2]}};
  m.results()["dropped_zero_ter"] = ape.dropped_zero_ter;
  m.write(manifest_path_for(o.manifest, dir, true));
  ctx.out << "ape-prep: train " << counts[0] << ", val " << counts[1] << ", test " << counts[2] << " (dropped "
          << ape.dropped_zero_ter << " with TER 0)\n";
  return 0;
}

struct ApePairsOpts {
  std::string in;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;
};

// Input rows: {"id", "hs", "cn_or", "cn_ape"}.
int cmd_ape_pairs(const ApePairsOpts& o, Context& ctx) {
  std::vector<humaneval::ApeInput> inputs;
  io::for_each_jsonl(o.in, [&](const nlohmann::json& j, std::size_t line) {
    try {
      inputs.push_back({j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump(),
                        j.at("hs").get<std::string>(), j.at("cn_or").get<std::string>(),
                        j.at("cn_ape").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("in", o.in + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  const auto comparisons = humaneval::build_ape_comparisons(inputs, o.seed);
  std::vector<nlohmann::json> rows;
  for (const auto& c : comparisons) rows.push_back(humaneval::to_json(c));
  write_jsonl(o.out, rows);
  RunManifest m("ape-pairs", ctx.argv);
  m.add_input(o.in);
  m.seeds()["order"] = o.seed;
  m.add_output(o.out);
  m.results()["comparisons"] = comparisons.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "ape-pairs: " << comparisons.size() << " comparisons\n";
  return 0;
}

}  // namespace

void add_data_commands(CLI::App& app, std::vector<Command>& commands) {
  {
    auto o = std::make_shared<SplitOpts>();
    auto* c = app.add_subcommand("split", "stratified train/val/test split with no HS shared across splits");
    c->add_option("--in", o->in, "dataset (.jsonl or .csv)")->required()->check(CLI::ExistingFile);
    c->add_option("--ratios", o->ratios, "train,val,test proportions")->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--tolerance", o->tolerance, "allowed per-target share deviation")->capture_default_str();
    c->add_option("--out-dir", o->out_dir)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_split(*o, ctx); }});
  }
  {
    auto o = std::make_shared<LotoOpts>();
    auto* c = app.add_subcommand("loto", "leave-one-target-out train/test construction");
    c->add_option("--in", o->in)->required()->check(CLI::ExistingFile);
    c->add_option("--leave-out", o->leave_out, "target withheld from training")->required();
    c->add_option("--quota", o->quota, "records sampled per LOTO target")->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--out-dir", o->out_dir)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_loto(*o, ctx); }});
  }
  {
    auto o = std::make_shared<ApePrepOpts>();
    auto* c = app.add_subcommand("ape-prep", "post-editing pairs with positive TER");
    c->add_option("--triplets", o->triplets)->required()->check(CLI::ExistingFile);
    c->add_option("--dataset", o->dataset, "split dataset files whose partition the pairs inherit")
        ->check(CLI::ExistingFile);
    c->add_option("--ratios", o->ratios, "used when no --dataset is given")->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--out-dir", o->out_dir)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_ape_prep(*o, ctx); }});
  }
  {
    auto o = std::make_shared<ApePairsOpts>();
    auto* c = app.add_subcommand("ape-pairs", "blind A/B comparisons in seeded order");
    c->add_option("--in", o->in)->required()->check(CLI::ExistingFile);
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_ape_pairs(*o, ctx); }});
  }
}

}  // namespace cnkit::cli
