// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "cli_pipeline.hpp"

using namespace cnkit;
using namespace cnkit::testing;
using nlohmann::json;

TEST_CASE("help, version and unknown commands") {
  CHECK(run_cli({"--help"}).code == cli::kOk);
  const auto v = run_cli({"--version"});
  CHECK(v.code == cli::kOk);
  CHECK(v.out.find("0.") != std::string::npos);
  CHECK(run_cli({"frobnicate"}).code == cli::kInvalid);
  CHECK(run_cli({}).code == cli::kInvalid);
}

TEST_CASE("invalid arguments and inputs exit with 2") {
  TempDir dir;
  write_text(dir / "data.jsonl", corpus::dataset_to_jsonl(synthetic_dataset({.records = 60})));
  const auto in = (dir / "data.jsonl").string();
  const auto out = (dir / "out").string();
  CHECK(run_cli({"split", "--in", in, "--ratios", "8,1", "--out-dir", out}).code == cli::kInvalid);
  CHECK(run_cli({"split", "--in", in, "--ratios", "8,-1,3", "--out-dir", out}).code == cli::kInvalid);
  CHECK(run_cli({"split", "--in", (dir / "missing.jsonl").string(), "--out-dir", out}).code == cli::kInvalid);
  CHECK(run_cli({"loto", "--in", in, "--leave-out", "ROBOTS", "--out-dir", out}).code == cli::kInvalid);
  CHECK(run_cli({"generate", "--model", "ngram:" + in, "--in", in, "--method", "greedyish", "--out", out}).code ==
        cli::kInvalid);

  write_text(dir / "broken.jsonl", "{\"id\": \"a\", \"hs\": \"x\"\n");
  const auto r = run_cli({"split", "--in", (dir / "broken.jsonl").string(), "--out-dir", out});
  CHECK(r.code == cli::kInvalid);
  CHECK(r.err.find("broken.jsonl") != std::string::npos);
}

TEST_CASE("an unreachable model bridge exits with 3") {
  TempDir dir;
  write_text(dir / "data.jsonl", corpus::dataset_to_jsonl(synthetic_dataset({.records = 60})));
  const auto r = run_cli({"generate", "--model", "bridge:127.0.0.1:1", "--in", (dir / "data.jsonl").string(),
                          "--method", "topk", "--out", (dir / "gen.jsonl").string()});
  CHECK(r.code == cli::kBridgeUnreachable);
}

TEST_CASE("annotate-serve on a busy port exits with 4") {
  TempDir dir;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 1) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  std::map<std::string, std::string> text;
  const auto winners = best_lm_winners(10, {"m1", "m2"}, {"bs"}, text);
  std::ostringstream rows;
  for (const auto& item : humaneval::build_eval_batch(winners, text, 5, 1)) rows << humaneval::to_json(item).dump() << '\n';
  write_text(dir / "batch.jsonl", rows.str());
  write_text(dir / "tokens.json", R"({"tok": "ann1"})");

  const auto r = run_cli({"annotate-serve", "--batch", (dir / "batch.jsonl").string(), "--store",
                          (dir / "store.jsonl").string(), "--tokens", (dir / "tokens.json").string(), "--host",
                          "127.0.0.1", "--port", std::to_string(port)});
  ::close(fd);
  CHECK(r.code == cli::kPortInUse);
}

TEST_CASE("full pipeline runs and every manifest reruns byte-identically") {
  TempDir dir;
  const auto p = run_pipeline(dir.path());
  for (const auto& s : p.stages) {
    INFO(s.name << ": " << s.result.err);
    CHECK(s.result.code == 0);
    CHECK(std::filesystem::exists(s.manifest));
  }
  REQUIRE(p.ok());
  CHECK(p.stages.size() == 20);

  // the report both prints and writes the TSV
  const auto& report = *std::find_if(p.stages.begin(), p.stages.end(), [](const auto& s) { return s.name == "report model"; });
  CHECK(report.result.out.find("group\tROU\tB-1\tB-3\tB-4\tRR\tNOV") != std::string::npos);

  for (const auto& s : p.stages) {
    const auto check = rerun_and_compare(s);
    INFO(s.name);
    CHECK(check.code == cli::kOk);
    CHECK(check.outputs > 0);
    CHECK(check.changed.empty());
  }
}

TEST_CASE("rerun detects tampered outputs and changed inputs") {
  TempDir dir;
  write_text(dir / "data.jsonl", corpus::dataset_to_jsonl(synthetic_dataset({.records = 200, .seed = 3})));
  const auto split_dir = (dir / "split").string();
  REQUIRE(run_cli({"split", "--in", (dir / "data.jsonl").string(), "--seed", "1", "--out-dir", split_dir}).code == 0);
  const auto manifest = (dir / "split/manifest.json").string();
  const auto ok = run_cli({"rerun", "--manifest", manifest});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.find("byte-identical") != std::string::npos);

  // a recorded output edited by hand: the rerun rewrites it but reports drift
  const auto manifest_bytes = read_bytes(manifest);
  auto j = json::parse(manifest_bytes);
  j["outputs"][0]["sha256"] = std::string(64, '0');
  write_text(manifest, j.dump(2));
  CHECK(run_cli({"rerun", "--manifest", manifest}).code == cli::kFailure);
  write_text(manifest, manifest_bytes);

  write_text(dir / "data.jsonl", corpus::dataset_to_jsonl(synthetic_dataset({.records = 200, .seed = 4})));
  const auto changed = run_cli({"rerun", "--manifest", manifest});
  CHECK(changed.code == cli::kInvalid);
  CHECK(changed.err.find("data.jsonl") != std::string::npos);

  CHECK(run_cli({"rerun", "--manifest", (dir / "nope.json").string()}).code == cli::kInvalid);
}
