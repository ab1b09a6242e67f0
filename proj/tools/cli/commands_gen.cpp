// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

// generate, evaluate, select, report, loto-run, syntax

#include <cstdio>
#include <cstdlib>
#include <future>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "cnkit/bridge.hpp"
#include "cnkit/decoding.hpp"
#include "cnkit/error.hpp"
#include "cnkit/experiments.hpp"
#include "cnkit/io.hpp"
#include "cnkit/metrics.hpp"
#include "cnkit/selection.hpp"
#include "cnkit/toxicity.hpp"
#include "commands.hpp"

namespace cnkit::cli {

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<T> out(n);
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += jobs) out[i] = fn(i);
    }));
  }
  for (auto& f : workers) f.get();
  return out;
}

struct GenerateOpts {
  std::string model;
  std::string in;
  std::string method = "topk";
  std::size_t k = 40;
  double p = 0.92;
  std::size_t beams = 5;
  double rep_penalty = 2.0;
  std::size_t max_len = 64;
  double alpha = 1.0;
  std::size_t n = 5;
  std::uint64_t seed = 0;
  std::size_t order = 3;
  std::string model_id;
  std::string decoding_id;
  std::size_t limit = 0;
  std::size_t jobs = 1;
  std::string out;
  std::string manifest;
};

int cmd_generate(const GenerateOpts& o, Context& ctx) {
  decoding::DecodingConfig dc;
  try {
    dc.method = decoding::parse_method(o.method);
  } catch (const ValidationError& e) {
    throw ValidationError("method", std::string("--method: ") + e.what());
  }
  dc.k = o.k;
  dc.p = o.p;
  dc.beams = o.beams;
  dc.repetition_penalty = o.rep_penalty;
  dc.max_len = o.max_len;
  dc.length_alpha = o.alpha;
  dc.seed = o.seed;
  try {
    dc.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(e.field(), "--" + e.field() + ": " + e.what());
  }

  RunManifest m("generate", ctx.argv);
  std::shared_ptr<const lm::LanguageModel> model;
  std::string default_model_id;
  const auto colon = o.model.find(':');
  const std::string kind = o.model.substr(0, colon);
  const std::string target = colon == std::string::npos ? "" : o.model.substr(colon + 1);
  if (kind == "ngram" && !target.empty()) {
    if (!std::filesystem::exists(target)) throw ValidationError("model", "--model: no such corpus " + target);
    std::vector<text::TokenSeq> seqs;
    for (const auto& r : corpus::load_dataset(target)) seqs.push_back(decoding::conditioned_sequence(r.hs, r.cn));
    model = std::make_shared<lm::NgramLm>(lm::train_ngram(seqs, o.order));
    m.add_input(target);
    m.config()["ngram_order"] = o.order;
    default_model_id = "ngram" + std::to_string(o.order);
  } else if (kind == "bridge" && !target.empty()) {
    model = lm::bridge_connect(target);
    m.config()["bridge_endpoint"] = target;
    default_model_id = "bridge";
  } else {
    throw ValidationError("model", "--model must be ngram:<corpus> or bridge:<host:port>, got '" + o.model + "'");
  }

  auto records = corpus::load_dataset(o.in);
  m.add_input(o.in);
  if (o.limit > 0 && records.size() > o.limit) records.resize(o.limit);
  const std::string model_id = o.model_id.empty() ? default_model_id : o.model_id;
  const std::string decoding_id = o.decoding_id.empty() ? std::string(decoding::to_string(dc.method)) : o.decoding_id;

  const auto rows = parallel_map<nlohmann::json>(records.size(), o.jobs, [&](std::size_t i) {
    decoding::DecodingConfig item = dc;
    item.seed = derive_seed(dc.seed, i);
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& g : decoding::generate_candidates(*model, records[i].hs, item, o.n)) {
      cands.push_back({{"text", decoding::candidate_text(model->vocabulary(), g)}});
    }
    return nlohmann::json{{"hs_id", records[i].id}, {"model_id", model_id}, {"decoding_id", decoding_id},
                          {"candidates", cands}};
  });
  write_jsonl(o.out, rows);
  m.add_output(o.out);
  m.config()["decoding"] = dc.to_json();
  m.config()["candidates_per_hs"] = o.n;
  m.config()["model_id"] = model_id;
  m.config()["decoding_id"] = decoding_id;
  m.seeds()["decoding"] = dc.seed;
  m.results()["hs"] = records.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "generate: " << records.size() << " HS x " << o.n << " candidates (" << model_id << ", "
          << decoding_id << ")\n";
  return 0;
}

struct EvaluateOpts {
  std::vector<std::string> candidates;
  std::vector<std::string> references;
  bool toxicity = false;
  std::string toxicity_endpoint;
  std::size_t jobs = 1;
  std::string out;
  std::string manifest;
};

int cmd_evaluate(const EvaluateOpts& o, Context& ctx) {
  RunManifest m("evaluate", ctx.argv);
  std::map<std::string, std::string> refs;
  for (const auto& p : o.references) {
    for (const auto& r : corpus::load_dataset(p)) refs[r.id] = r.cn;
    m.add_input(p);
  }
  std::vector<nlohmann::json> cells;
  for (const auto& p : o.candidates) {
    for (auto& row : read_jsonl(p)) cells.push_back(std::move(row));
    m.add_input(p);
  }
  std::set<std::string> missing;
  for (const auto& c : cells) {
    const auto id = c.at("hs_id").get<std::string>();
    if (!refs.count(id)) missing.insert(id);
  }
  if (!missing.empty()) {
    std::string msg = "--references lacks " + std::to_string(missing.size()) + " hs ids:";
    std::size_t shown = 0;
    for (const auto& id : missing) {
      if (shown++ == 20) {
        msg += " ...";
        break;
      }
      msg += " " + id;
    }
    throw ValidationError("references", msg);
  }

  std::unique_ptr<metrics::ToxicityClient> tox;
  if (o.toxicity) {
    std::string endpoint = o.toxicity_endpoint;
    if (endpoint.empty()) {
      const char* env = std::getenv("TOXICITY_ENDPOINT");
      endpoint = env ? env : "";
    }
    if (endpoint.empty()) throw ConfigError("--toxicity needs --toxicity-endpoint or TOXICITY_ENDPOINT");
    tox = std::make_unique<metrics::ToxicityClient>(metrics::ToxicityConfig::from_env(endpoint),
                                                    metrics::make_http_transport());
    m.config()["toxicity_endpoint"] = endpoint;
  }

  const auto rows = parallel_map<nlohmann::json>(cells.size(), o.jobs, [&](std::size_t i) {
    auto cell = selection::cell_from_json(cells[i]);
    const auto ref = text::tokenize(refs.at(cell.hs_id));
    for (auto& c : cell.candidates) c.metrics = metrics::score_candidate(text::tokenize(c.text), ref);
    auto j = selection::to_json(cell);
    if (tox) {
      for (std::size_t k = 0; k < cell.candidates.size(); ++k) {
        j["candidates"][k]["toxicity"] = tox->score(cell.candidates[k].text);
      }
    }
    return j;
  });
  write_jsonl(o.out, rows);
  m.add_output(o.out);
  m.config()["toxicity"] = o.toxicity;
  m.results()["cells"] = rows.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "evaluate: scored " << rows.size() << " cells\n";
  return 0;
}

struct SelectOpts {
  std::vector<std::string> in;
  std::string group = "model";
  std::string out;
  std::string manifest;
};

int cmd_select(const SelectOpts& o, Context& ctx) {
  selection::GroupBy g;
  try {
    g = selection::parse_group_by(o.group);
  } catch (const ValidationError& e) {
    throw ValidationError("group", std::string("--group: ") + e.what());
  }
  RunManifest m("select", ctx.argv);
  std::vector<selection::CandidateCell> pool;
  for (const auto& p : o.in) {
    for (const auto& row : read_jsonl(p)) pool.push_back(selection::cell_from_json(row));
    m.add_input(p);
  }
  const auto winners = selection::select_best(pool, g);
  std::vector<nlohmann::json> rows;
  for (const auto& w : winners) rows.push_back(selection::to_json(w));
  write_jsonl(o.out, rows);
  m.add_output(o.out);
  m.config()["group"] = std::string(selection::to_string(g));
  m.results()["winners"] = winners.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "select: " << winners.size() << " winners grouped by " << selection::to_string(g) << "\n";
  return 0;
}

struct ReportOpts {
  std::string winners;
  std::vector<std::string> train;
  std::size_t window = 1000;
  std::string out;
  std::string manifest;
};

int cmd_report(const ReportOpts& o, Context& ctx) {
  RunManifest m("report", ctx.argv);
  std::vector<selection::Winner> winners;
  for (const auto& row : read_jsonl(o.winners)) winners.push_back(selection::winner_from_json(row));
  m.add_input(o.winners);
  std::vector<text::TokenSeq> training;
  for (const auto& p : o.train) {
    for (const auto& r : corpus::load_dataset(p)) training.push_back(text::tokenize(r.cn));
    m.add_input(p);
  }
  metrics::RepetitionOptions rr;
  rr.window = o.window;
  const auto rows = selection::corpus_report(winners, training, rr);
  io::write_file(o.out, selection::report_tsv(rows));
  m.add_output(o.out);
  m.config()["rr_window"] = o.window;
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << selection::report_tsv(rows);
  return 0;
}

struct LotoRunOpts {
  std::string in;
  std::vector<std::string> targets;
  std::size_t quota = 600;
  std::uint64_t seed = 0;
  std::size_t order = 3;
  std::size_t n = 5;
  std::size_t max_test = 0;
  std::size_t max_len = 64;
  std::string points = "per-target";
  std::size_t window = 1000;
  bool sequential = false;
  std::string out_dir;
  std::string manifest;
};

int cmd_loto_run(const LotoRunOpts& o, Context& ctx) {
  experiments::LotoRunConfig cfg;
  if (!o.targets.empty()) {
    cfg.targets.clear();
    for (const auto& t : o.targets) {
      try {
        cfg.targets.push_back(corpus::parse_target(t));
      } catch (const ValidationError& e) {
        throw ValidationError("targets", std::string("--targets: ") + e.what());
      }
    }
  }
  cfg.loto.per_target_quota = o.quota;
  cfg.loto.seed = o.seed;
  cfg.decodings = experiments::LotoRunConfig::default_decodings(o.seed);
  for (auto& d : cfg.decodings) d.config.max_len = o.max_len;
  cfg.candidates = o.n;
  cfg.max_test_items = o.max_test;
  cfg.rr.window = o.window;
  cfg.parallel = !o.sequential;
  if (o.points == "per-target") {
    cfg.points = experiments::CorrelationPoints::PerTarget;
  } else if (o.points == "per-cn") {
    cfg.points = experiments::CorrelationPoints::PerCn;
  } else {
    throw ValidationError("points", "--points must be per-target or per-cn");
  }

  const auto dataset = corpus::load_dataset(o.in);
  const auto report = experiments::loto_run(dataset, experiments::ngram_factory(o.order), cfg);

  RunManifest m("loto-run", ctx.argv);
  m.add_input(o.in);
  const std::filesystem::path dir = o.out_dir;
  const std::vector<std::pair<std::string, std::string>> files = {
      {"overlap.tsv", experiments::overlap_tsv(report)},
      {"influence.tsv", experiments::influence_tsv(report.influence)},
      {"repetition.tsv", experiments::repetition_tsv(report)},
      {"correlation.json", experiments::to_json(report.correlations).dump(2) + "\n"},
      {"scatter.csv", experiments::scatter_csv(report)},
  };
  for (const auto& [name, body] : files) {
    io::write_file(dir / name, body);
    m.add_output(dir / name);
  }
  nlohmann::json targets = nlohmann::json::array();
  for (auto t : cfg.targets) targets.push_back(std::string(corpus::to_string(t)));
  m.config() = {{"targets", targets},   {"per_target_quota", o.quota}, {"ngram_order", o.order},
                {"candidates", o.n},    {"max_test_items", o.max_test}, {"max_len", o.max_len},
                {"points", o.points},   {"rr_window", o.window}};
  m.seeds()["loto"] = o.seed;
  m.seeds()["decoding"] = o.seed;
  for (const auto& t : report.targets) {
    m.results()["most_influential"][std::string(corpus::to_string(t.target))] =
        std::string(corpus::to_string(t.most_influential));
  }
  m.write(manifest_path_for(o.manifest, dir, true));
  ctx.out << experiments::overlap_tsv(report);
  return 0;
}

struct SyntaxOpts {
  std::string conllu;
  std::string out;
  std::string manifest;
};

int cmd_syntax(const SyntaxOpts& o, Context& ctx) {
  const auto docs = metrics::parse_conllu_documents(io::read_file(o.conllu));
  if (docs.empty()) throw ValidationError("conllu", "--conllu: no documents in " + o.conllu);
  std::string tsv = "id\tMSD\tASD\tNST\n";
  char buf[96];
  double msd = 0.0, asd = 0.0, nst = 0.0;
  for (const auto& d : docs) {
    const auto r = metrics::syntactic_metrics(d.parsed);
    std::snprintf(buf, sizeof buf, "\t%zu\t%.3f\t%zu\n", r.msd, r.asd, r.nst);
    tsv += d.id + buf;
    msd += static_cast<double>(r.msd);
    asd += r.asd;
    nst += static_cast<double>(r.nst);
  }
  const double n = static_cast<double>(docs.size());
  std::snprintf(buf, sizeof buf, "mean\t%.3f\t%.3f\t%.3f\n", msd / n, asd / n, nst / n);
  tsv += buf;
  io::write_file(o.out, tsv);
  RunManifest m("syntax", ctx.argv);
  m.add_input(o.conllu);
  m.add_output(o.out);
  m.results()["documents"] = docs.size();
  m.write(manifest_path_for(o.manifest, o.out, false));
  ctx.out << "syntax: " << docs.size() << " documents\n";
  return 0;
}

}  // namespace

void add_generation_commands(CLI::App& app, std::vector<Command>& commands) {
  {
    auto o = std::make_shared<GenerateOpts>();
    auto* c = app.add_subcommand("generate", "generate candidate CNs for each HS");
    c->add_option("--model", o->model, "ngram:<train corpus> or bridge:<host:port>")->required();
    c->add_option("--in", o->in, "records whose HS are conditioned on")->required()->check(CLI::ExistingFile);
    c->add_option("--method", o->method, "bs, topk, topp or toppk")->capture_default_str();
    c->add_option("--k", o->k)->capture_default_str();
    c->add_option("--p", o->p)->capture_default_str();
    c->add_option("--beams", o->beams)->capture_default_str();
    c->add_option("--rep-penalty", o->rep_penalty, "beam search repetition penalty")->capture_default_str();
    c->add_option("--max-len", o->max_len)->capture_default_str();
    c->add_option("--alpha", o->alpha, "beam length normalisation exponent")->capture_default_str();
    c->add_option("--n", o->n, "candidates per HS")->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--order", o->order, "n-gram order")->capture_default_str();
    c->add_option("--model-id", o->model_id);
    c->add_option("--decoding-id", o->decoding_id);
    c->add_option("--limit", o->limit, "only the first N records (0 = all)");
    c->add_option("--jobs", o->jobs)->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_generate(*o, ctx); }});
  }
  {
    auto o = std::make_shared<EvaluateOpts>();
    auto* c = app.add_subcommand("evaluate", "score candidates against the gold CN");
    c->add_option("--candidates", o->candidates)->required()->check(CLI::ExistingFile);
    c->add_option("--references", o->references, "dataset files holding the gold CNs")
        ->required()
        ->check(CLI::ExistingFile);
    c->add_flag("--toxicity", o->toxicity, "query the toxicity service (needs TOXICITY_API_KEY)");
    c->add_option("--toxicity-endpoint", o->toxicity_endpoint);
    c->add_option("--jobs", o->jobs)->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_evaluate(*o, ctx); }});
  }
  {
    auto o = std::make_shared<SelectOpts>();
    auto* c = app.add_subcommand("select", "pick the minimum mean-rank candidate per HS and group");
    c->add_option("--in", o->in, "scored candidate files")->required()->check(CLI::ExistingFile);
    c->add_option("--group", o->group, "model, decoding or model-decoding")->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_select(*o, ctx); }});
  }
  {
    auto o = std::make_shared<ReportOpts>();
    auto* c = app.add_subcommand("report", "overlap and diversity table over winners");
    c->add_option("--winners", o->winners)->required()->check(CLI::ExistingFile);
    c->add_option("--train", o->train, "training data for novelty")->required()->check(CLI::ExistingFile);
    c->add_option("--window", o->window, "repetition-rate window in tokens")->capture_default_str();
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_report(*o, ctx); }});
  }
  {
    auto o = std::make_shared<LotoRunOpts>();
    auto* c = app.add_subcommand("loto-run", "LOTO experiment with n-gram models per configuration");
    c->add_option("--in", o->in)->required()->check(CLI::ExistingFile);
    c->add_option("--targets", o->targets, "left-out targets (default: the five LOTO targets)");
    c->add_option("--quota", o->quota)->capture_default_str();
    c->add_option("--seed", o->seed)->capture_default_str();
    c->add_option("--order", o->order)->capture_default_str();
    c->add_option("--n", o->n)->capture_default_str();
    c->add_option("--max-test", o->max_test, "cap on test HS per target (0 = all)");
    c->add_option("--max-len", o->max_len)->capture_default_str();
    c->add_option("--points", o->points, "per-target or per-cn")->capture_default_str();
    c->add_option("--window", o->window)->capture_default_str();
    c->add_flag("--sequential", o->sequential, "run targets one after another");
    c->add_option("--out-dir", o->out_dir)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_loto_run(*o, ctx); }});
  }
  {
    auto o = std::make_shared<SyntaxOpts>();
    auto* c = app.add_subcommand("syntax", "dependency depth and sentence counts from CoNLL-U");
    c->add_option("--conllu", o->conllu)->required()->check(CLI::ExistingFile);
    c->add_option("--out", o->out)->required();
    c->add_option("--manifest-out", o->manifest);
    commands.push_back({c, [o](Context& ctx) { return cmd_syntax(*o, ctx); }});
  }
}

}  // namespace cnkit::cli
