// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

// eval-batch, annotate-serve, aggregate, ape-tally

#include <atomic>
#include <chrono>
#include <csignal>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <thread>

#include "cnkit/annotation_service.hpp"
#include "cnkit/error.hpp"
#include "cnkit/humaneval.hpp"
#include "cnkit/io.hpp"
#include "commands.hpp"

namespace cnkit::cli {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop = true; }

std::vector<humaneval::EvaluationItem> load_batch(const std::string& path) {
  std::vector<humaneval::EvaluationItem> batch;
  for (const auto& row : read_jsonl(path)) batch.push_back(humaneval::item_from_json(row));
  return batch;
}

std::vector<humaneval::ApeComparison> load_comparisons(const std::string& path) {
  std::vector<humaneval::ApeComparison> out;
  for (const auto& row : read_jsonl(path)) out.push_back(humaneval::comparison_from_json(row));
  return out;
}

struct EvalBatchOpts {
  std::string winners;
  std::vector<std::string> dataset;
  std::size_t size = 200;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;
};

int cmd_eval_batch(const EvalBatchOpts& o, Context& ctx) {
  RunManifest m("eval-batch", ctx.argv);
  std::vector<selection::Winner> winners;
  for (const auto& row : read_jsonl(o.winners)) winners.push_back(selection::winner_from_json(row));
  m.add_input(o.winners);
  std::map<std::string, std::string> hs_text;
  for (const auto& p : o.dataset) {
    for (const auto& r : corpus::load_dataset(p)) hs_text[r.id] = r.hs;
    m.add_input(p);
  }
  const auto batch = humaneval::build_eval_batch(winners, hs_text, o.size, o.seed);
  std::vector<nlohmann::json> rows;
  for (const auto& item : batch) rows.push_back(humaneval::to_json(item));
  write_jsonl(o.out, rows);
  m.add_output(o.out);
  m.config()["sample_size"] = o.size;
  m.seeds()["batch"] = o.seed;
  m.results()["items"] = batch.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "eval-batch: " << batch.size() << " items\n";
  return 0;
}

struct ServeOpts {
  std::string batch;
  std::string comparisons;
  std::string store;
  std::string tokens;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
};

int cmd_annotate_serve(const ServeOpts& o, Context& ctx) {
  const auto tokens_json = nlohmann::json::parse(io::read_file(o.tokens), nullptr, false);
  if (tokens_json.is_discarded() || !tokens_json.is_object() || tokens_json.empty()) {
    throw ValidationError("tokens", "--tokens must be a JSON object mapping token to annotator id");
  }
  std::map<std::string, std::string> tokens;
  for (const auto& [token, who] : tokens_json.items()) {
    if (!who.is_string()) throw ValidationError("tokens", "--tokens: annotator for a token must be a string");
    tokens[token] = who.get<std::string>();
  }
  auto batch = load_batch(o.batch);
  std::vector<humaneval::ApeComparison> comparisons;
  if (!o.comparisons.empty()) comparisons = load_comparisons(o.comparisons);

  humaneval::AnnotationStore store(o.store);
  humaneval::AnnotationService service(store, std::move(batch), std::move(comparisons), std::move(tokens));
  humaneval::AnnotationServer server(service, o.static_dir);
  const int port = server.start(o.host, o.port);
  ctx.out << "annotate-serve: listening on " << o.host << ":" << port << " (" << store.log_size()
          << " log entries)" << std::endl;

  g_stop = false;
  auto prev_int = std::signal(SIGINT, on_stop_signal);
  auto prev_term = std::signal(SIGTERM, on_stop_signal);
  while (!g_stop && server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  store.flush();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  ctx.out << "annotate-serve: stopped with " << store.log_size() << " log entries" << std::endl;
  return 0;
}

struct AggregateOpts {
  std::string store;
  std::string batch;
  std::string group = "model";
  std::string export_path;
  std::string out;
  std::string manifest;
};

int cmd_aggregate(const AggregateOpts& o, Context& ctx) {
  selection::GroupBy g;
  try {
    g = selection::parse_group_by(o.group);
  } catch (const ValidationError& e) {
    throw ValidationError("group", std::string("--group: ") + e.what());
  }
  if (!std::filesystem::exists(o.store)) throw ValidationError("store", "--store: no such file " + o.store);
  RunManifest m("aggregate", ctx.argv);
  const auto batch = load_batch(o.batch);
  m.add_input(o.batch);
  m.add_input(o.store);
  std::vector<humaneval::AnnotationRecord> current;
  {
    humaneval::AnnotationStore store(o.store);
    current = store.annotations();
  }
  const auto rows = humaneval::aggregate_human(current, batch, g);
  io::write_file(o.out, humaneval::human_tsv(rows));
  m.add_output(o.out);
  if (!o.export_path.empty()) {
    std::vector<nlohmann::json> exported;
    for (const auto& r : current) exported.push_back(humaneval::to_json(r));
    write_jsonl(o.export_path, exported);
    m.add_output(o.export_path);
  }
  m.config()["group"] = std::string(selection::to_string(g));
  m.results()["records"] = current.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << humaneval::human_tsv(rows);
  return 0;
}

struct TallyOpts {
  std::string comparisons;
  std::string store;
  std::vector<std::string> annotators;
  std::string out;
  std::string manifest;
};

int cmd_ape_tally(const TallyOpts& o, Context& ctx) {
  if (!std::filesystem::exists(o.store)) throw ValidationError("store", "--store: no such file " + o.store);
  RunManifest m("ape-tally", ctx.argv);
  const auto comparisons = load_comparisons(o.comparisons);
  m.add_input(o.comparisons);
  m.add_input(o.store);
  std::vector<humaneval::VerdictRecord> verdicts;
  {
    humaneval::AnnotationStore store(o.store);
    verdicts = store.verdicts();
  }
  const std::set<std::string> who(o.annotators.begin(), o.annotators.end());
  const auto tally = humaneval::ape_preference_tally(comparisons, verdicts, who);
  io::write_file(o.out, humaneval::tally_tsv(tally));
  m.add_output(o.out);
  m.results()["prefer_ape"] = tally.mean.prefer_ape;
  m.results()["prefer_original"] = tally.mean.prefer_original;
  m.results()["tie"] = tally.mean.tie;
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << humaneval::tally_tsv(tally);
  return 0;
}

}  // namespace

void add_human_commands(CLI::App& app, std::vector<Command>& commands) {
  {
    auto o = std::make_shared<EvalBatchOpts>();
    auto* c = app.add_subcommand("eval-batch", "sample HS items for human evaluation");
    c->add_option("--winners", o->winners, "winners grouped by model")->required()->check(CLI::ExistingFile);
    c->add_option("--dataset", o->dataset, "files holding the HS texts")->required()->check(CLI::ExistingFile);
    c->add_option("--size", o->size)->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_eval_batch(*o, ctx); }});
  }
  {
    auto o = std::make_shared<ServeOpts>();
    auto* c = app.add_subcommand("annotate-serve", "serve the annotation API until SIGINT/SIGTERM");
    c->add_option("--batch", o->batch)->required()->check(CLI::ExistingFile);
    c->add_option("--comparisons", o->comparisons)->check(CLI::ExistingFile);
    c->add_option("--store", o->store, "annotation log (created if missing)")->required();
    c->add_option("--tokens", o->tokens, "JSON object: token -> annotator id")->required()->check(CLI::ExistingFile);
    c->add_option("--host", o->host)->capture_default_str();
    c->add_option("--port", o->port)->capture_default_str();
    c->add_option("--static", o->static_dir, "directory served under /ui")->check(CLI::ExistingDirectory);
    commands.push_back({c, [o](Context& ctx) { return cmd_annotate_serve(*o, ctx); }});
  }
  {
    auto o = std::make_shared<AggregateOpts>();
    auto* c = app.add_subcommand("aggregate", "human-evaluation table from the annotation log");
    c->add_option("--store", o->store)->required();
    c->add_option("--batch", o->batch)->required()->check(CLI::ExistingFile);
    c->add_option("--group", o->group, "model, decoding or model-decoding")->capture_default_str();
    c->add_option("--export", o->export_path, "also write the current-state records as JSON Lines");
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_aggregate(*o, ctx); }});
  }
  {
    auto o = std::make_shared<TallyOpts>();
    auto* c = app.add_subcommand("ape-tally", "preference percentages for the A/B comparisons");
    c->add_option("--comparisons", o->comparisons)->required()->check(CLI::ExistingFile);
    c->add_option("--store", o->store)->required();
    c->add_option("--annotators", o->annotators, "annotators expected to judge every comparison");
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_ape_tally(*o, ctx); }});
  }
}

}  // namespace cnkit::cli
