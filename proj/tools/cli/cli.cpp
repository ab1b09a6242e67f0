// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <ostream>

#include "cnkit/annotation_service.hpp"
#include "cnkit/error.hpp"
#include "cnkit/io.hpp"
#include "commands.hpp"

namespace cnkit::cli {

std::filesystem::path manifest_path_for(const std::string& explicit_path, const std::filesystem::path& out,
                                        bool out_is_dir) {
  if (!explicit_path.empty()) return explicit_path;
  if (out_is_dir) return out / "manifest.json";
  return out.string() + ".manifest.json";
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> rows;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) { rows.push_back(j); });
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  io::write_file(path, io::to_jsonl(rows));
}

void write_records(const std::filesystem::path& path, const std::vector<corpus::DatasetRecord>& records) {
  io::write_file(path, corpus::dataset_to_jsonl(records));
}

std::vector<double> parse_ratio_list(const std::string& s, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string part = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError(flag, std::string("--") + flag + ": '" + part + "' is not a number");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

namespace {

int rerun(const std::string& manifest_path, Context& ctx) {
  const auto manifest = nlohmann::json::parse(io::read_file(manifest_path), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object() || !manifest.contains("argv")) {
    throw ValidationError("manifest", "--manifest: " + manifest_path + " is not a run manifest");
  }
  const auto changed = verify_hashes(manifest.at("inputs"));
  if (!changed.empty()) {
    std::string msg = "inputs changed since the recorded run:";
    for (const auto& m : changed) msg += " " + m.path;
    throw ValidationError("manifest", msg);
  }
  const auto argv = manifest.at("argv").get<std::vector<std::string>>();
  if (!argv.empty() && argv.front() == "rerun") throw ValidationError("manifest", "refusing to rerun a rerun");
  const int rc = run(argv, ctx.out, ctx.err);
  if (rc != kOk) return rc;
  const auto diffs = verify_hashes(manifest.at("outputs"));
  for (const auto& d : diffs) {
    ctx.err << "rerun: " << d.path << " differs (expected " << d.expected << ", got "
            << (d.actual.empty() ? "missing" : d.actual) << ")\n";
  }
  if (!diffs.empty()) return kFailure;
  ctx.out << "rerun: " << manifest.at("outputs").size() << " outputs byte-identical\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"counter-narrative generation and evaluation toolkit", "cnkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::vector<Command> commands;
  add_data_commands(app, commands);
  add_generation_commands(app, commands);
  add_human_commands(app, commands);

  std::string manifest_path;
  auto* rerun_cmd = app.add_subcommand("rerun", "re-execute a recorded run and compare output hashes");
  rerun_cmd->add_option("--manifest", manifest_path, "manifest written by an earlier run")->required();

  Context ctx{out, err, args};
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  }

  try {
    if (rerun_cmd->parsed()) return rerun(manifest_path, ctx);
    for (auto& c : commands) {
      if (c.app->parsed()) return c.run(ctx);
    }
    err << "error: no subcommand\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ConstraintError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const humaneval::PortInUseError& e) {
    err << "error: " << e.what() << "\n";
    return kPortInUse;
  } catch (const TransportError& e) {
    err << "error: " << e.what() << "\n";
    return kBridgeUnreachable;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace cnkit::cli
