// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnkit/corpus.hpp"
#include "manifest.hpp"

namespace cnkit::cli {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;
};

struct Command {
  CLI::App* app;
  std::function<int(Context&)> run;
};

void add_data_commands(CLI::App& app, std::vector<Command>& commands);
void add_generation_commands(CLI::App& app, std::vector<Command>& commands);
void add_human_commands(CLI::App& app, std::vector<Command>& commands);

// Shared helpers.
std::filesystem::path manifest_path_for(const std::string& explicit_path, const std::filesystem::path& out,
                                        bool out_is_dir);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
void write_records(const std::filesystem::path& path, const std::vector<corpus::DatasetRecord>& records);
std::vector<double> parse_ratio_list(const std::string& s, const char* flag);

}  // namespace cnkit::cli
