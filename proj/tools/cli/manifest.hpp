// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cnkit::cli {

inline constexpr const char* kToolVersion = "0.3.0";

// Everything needed to re-run a command: argv, effective configuration,
// seeds, and content hashes of inputs and outputs. No timestamps, so two
// runs of the same command write byte-identical manifests.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv);

  nlohmann::json& config() { return config_; }
  nlohmann::json& seeds() { return seeds_; }
  nlohmann::json& results() { return results_; }

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  // Hashes outputs at call time.
  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json results_ = nlohmann::json::object();
  std::vector<std::pair<std::string, std::string>> inputs_;  // path, sha256
  std::vector<std::string> outputs_;
};

struct HashMismatch {
  std::string path;
  std::string expected;
  std::string actual;  // empty when the file is missing
};

// Compares the recorded hashes in `entries` ({"path","sha256"} objects)
// against the files on disk.
std::vector<HashMismatch> verify_hashes(const nlohmann::json& entries);

}  // namespace cnkit::cli
