// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include "cnkit/io.hpp"

namespace cnkit::cli {

RunManifest::RunManifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.emplace_back(path.string(), io::sha256_file(path));
}

void RunManifest::add_output(const std::filesystem::path& path) { outputs_.push_back(path.string()); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [p, h] : inputs_) inputs.push_back({{"path", p}, {"sha256", h}});
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& p : outputs_) outputs.push_back({{"path", p}, {"sha256", io::sha256_file(p)}});
  return {{"tool", "cnkit"},  {"version", kToolVersion}, {"command", command_}, {"argv", argv_},
          {"config", config_}, {"seeds", seeds_},        {"inputs", inputs},    {"outputs", outputs},
          {"results", results_}};
}

void RunManifest::write(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

std::vector<HashMismatch> verify_hashes(const nlohmann::json& entries) {
  std::vector<HashMismatch> out;
  for (const auto& e : entries) {
    const auto path = e.at("path").get<std::string>();
    const auto expected = e.at("sha256").get<std::string>();
    std::string actual;
    if (std::filesystem::exists(path)) actual = io::sha256_file(path);
    if (actual != expected) out.push_back({path, expected, actual});
  }
  return out;
}

}  // namespace cnkit::cli
