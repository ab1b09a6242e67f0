// Copyright 2026 The cnkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "cnkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "cnkit/error.hpp"
#include "cnkit/io.hpp"
#include "cnkit/rng.hpp"
#include "cnkit/textkit.hpp"

namespace cnkit::corpus {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos; }

std::size_t index_of(Split s) { return static_cast<std::size_t>(s); }

std::string located(std::string_view source, std::size_t line, const std::string& msg) {
  return std::string(source) + ":" + std::to_string(line) + ": " + msg;
}

// Splits RFC 4180 CSV into rows, remembering the line each row starts on.
std::vector<std::pair<std::size_t, std::vector<std::string>>> parse_csv_rows(std::string_view text,
                                                                             std::string_view source) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1, row_line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.emplace_back(row_line, std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
      ++line;
      row_line = line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ValidationError("csv", located(source, row_line, "unterminated quoted field"));
  if (field_started || !row.empty()) end_row();
  return rows;
}

// Controlled rounding of stratum sizes into per-split cells whose column sums
// equal the split quotas.
std::vector<std::array<std::size_t, 3>> stratum_quotas(const std::vector<std::size_t>& stratum_sizes,
                                                       const std::array<std::size_t, 3>& quotas) {
  const std::size_t total = std::accumulate(stratum_sizes.begin(), stratum_sizes.end(), std::size_t{0});
  std::vector<std::array<std::size_t, 3>> cells(stratum_sizes.size());
  if (total == 0) return cells;
  std::vector<std::size_t> row_left(stratum_sizes.size());
  std::array<std::size_t, 3> col_left = quotas;
  struct Unit {
    double frac;
    std::size_t s, j;
  };
  std::vector<Unit> units;
  for (std::size_t s = 0; s < stratum_sizes.size(); ++s) {
    std::size_t used = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double exact = static_cast<double>(stratum_sizes[s]) * static_cast<double>(quotas[j]) /
                           static_cast<double>(total);
      const auto fl = static_cast<std::size_t>(std::floor(exact + 1e-12));
      cells[s][j] = fl;
      used += fl;
      col_left[j] -= std::min(col_left[j], fl);
      units.push_back({exact - static_cast<double>(fl), s, j});
    }
    row_left[s] = stratum_sizes[s] - std::min(stratum_sizes[s], used);
  }
  std::stable_sort(units.begin(), units.end(), [](const Unit& a, const Unit& b) { return a.frac > b.frac; });
  for (const auto& u : units) {
    if (row_left[u.s] > 0 && col_left[u.j] > 0) {
      ++cells[u.s][u.j];
      --row_left[u.s];
      --col_left[u.j];
    }
  }
  for (std::size_t s = 0; s < stratum_sizes.size(); ++s) {
    for (std::size_t j = 0; j < 3 && row_left[s] > 0; ++j) {
      const std::size_t take = std::min(row_left[s], col_left[j]);
      cells[s][j] += take;
      row_left[s] -= take;
      col_left[j] -= take;
    }
  }
  return cells;
}

std::vector<std::size_t> sample_indices(std::vector<std::size_t> candidates, std::size_t quota, Rng& rng) {
  rng.shuffle(candidates);
  candidates.resize(quota);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace

std::string_view to_string(TargetLabel t) {
  switch (t) {
    case TargetLabel::Disabled: return "DISABLED";
    case TargetLabel::Jews: return "JEWS";
    case TargetLabel::Lgbt: return "LGBT+";
    case TargetLabel::Migrants: return "MIGRANTS";
    case TargetLabel::Muslims: return "MUSLIMS";
    case TargetLabel::Poc: return "POC";
    case TargetLabel::Women: return "WOMEN";
    case TargetLabel::Other: return "OTHER";
  }
  return "?";
}

TargetLabel parse_target(std::string_view s) {
  const std::string u = upper(s);
  for (TargetLabel t : kAllTargets) {
    if (u == to_string(t)) return t;
  }
  throw ValidationError("targets", "unknown target label '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  const std::string u = upper(s);
  if (u == "TRAIN") return Split::Train;
  if (u == "VAL" || u == "VALIDATION" || u == "DEV") return Split::Val;
  if (u == "TEST") return Split::Test;
  throw ValidationError("split", "unknown split '" + std::string(s) + "'");
}

bool DatasetRecord::has_target(TargetLabel t) const {
  return std::find(targets.begin(), targets.end(), t) != targets.end();
}

void validate(const DatasetRecord& r) {
  if (blank(r.id)) throw ValidationError("id", "empty id");
  if (blank(r.hs)) throw ValidationError("hs", "record " + r.id + ": hs is empty");
  if (blank(r.cn)) throw ValidationError("cn", "record " + r.id + ": cn is empty");
  if (r.targets.empty()) throw ValidationError("targets", "record " + r.id + ": no targets");
  std::set<TargetLabel> seen;
  for (TargetLabel t : r.targets) {
    if (!seen.insert(t).second) {
      throw ValidationError("targets", "record " + r.id + ": duplicate target " + std::string(to_string(t)));
    }
  }
}

nlohmann::json to_json(const DatasetRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["hs"] = r.hs;
  j["cn"] = r.cn;
  auto& t = j["targets"] = nlohmann::json::array();
  for (TargetLabel x : r.targets) t.push_back(std::string(to_string(x)));
  if (r.split) j["split"] = std::string(to_string(*r.split));
  return j;
}

namespace {

std::string string_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(key, std::string("missing field '") + key + "'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ValidationError(key, std::string("field '") + key + "' must be a string");
}

}  // namespace

DatasetRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("row", "expected a JSON object");
  DatasetRecord r;
  r.id = string_field(j, "id");
  r.hs = string_field(j, "hs");
  r.cn = string_field(j, "cn");
  auto t = j.find("targets");
  if (t == j.end() || !t->is_array()) throw ValidationError("targets", "field 'targets' must be an array");
  for (const auto& x : *t) {
    if (!x.is_string()) throw ValidationError("targets", "target labels must be strings");
    r.targets.push_back(parse_target(x.get<std::string>()));
  }
  auto s = j.find("split");
  if (s != j.end() && !s->is_null()) {
    if (!s->is_string()) throw ValidationError("split", "field 'split' must be a string");
    r.split = parse_split(s->get<std::string>());
  }
  validate(r);
  return r;
}

DatasetFormat format_for(const std::filesystem::path& path) {
  return upper(path.extension().string()) == ".CSV" ? DatasetFormat::Csv : DatasetFormat::Jsonl;
}

namespace {

void check_unique_ids(const std::vector<DatasetRecord>& records, const std::vector<std::size_t>& lines,
                      std::string_view source) {
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = seen.emplace(records[i].id, lines[i]);
    if (!fresh) {
      throw ValidationError("id", located(source, lines[i], "duplicate id '" + records[i].id +
                                                                "' (first seen at line " +
                                                                std::to_string(it->second) + ")"));
    }
  }
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::Csv) return parse_csv_dataset(io::read_file(path), path.string());
  std::vector<DatasetRecord> records;
  std::vector<std::size_t> lines;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      records.push_back(record_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), located(path.string(), line, "field '" + e.field() + "': " + e.what()));
    }
    lines.push_back(line);
  });
  check_unique_ids(records, lines, path.string());
  return records;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_for(path));
}

std::vector<DatasetRecord> parse_csv_dataset(std::string_view contents, std::string_view source) {
  auto rows = parse_csv_rows(contents, source);
  if (rows.empty()) throw ValidationError("header", std::string(source) + ": missing header row");
  const std::vector<std::string> expected{"id", "hs", "cn", "targets", "split"};
  if (rows.front().second != expected) {
    throw ValidationError("header", located(source, rows.front().first, "header must be id,hs,cn,targets,split"));
  }
  std::vector<DatasetRecord> records;
  std::vector<std::size_t> lines;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& [line, cells] = rows[i];
    if (cells.size() != expected.size()) {
      throw ValidationError("row", located(source, line, "expected 5 columns, got " + std::to_string(cells.size())));
    }
    DatasetRecord r;
    r.id = cells[0];
    r.hs = cells[1];
    r.cn = cells[2];
    try {
      std::string_view rest = cells[3];
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        std::string_view label = rest.substr(0, comma);
        while (!label.empty() && label.front() == ' ') label.remove_prefix(1);
        while (!label.empty() && label.back() == ' ') label.remove_suffix(1);
        if (!label.empty()) r.targets.push_back(parse_target(label));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
      if (!blank(cells[4])) r.split = parse_split(cells[4]);
      validate(r);
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), located(source, line, "field '" + e.field() + "': " + e.what()));
    }
    records.push_back(std::move(r));
    lines.push_back(line);
  }
  check_unique_ids(records, lines, source);
  return records;
}

std::string dataset_to_jsonl(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::string hs_key(std::string_view hs) { return text::nfc(hs); }

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ValidationError("ratios", "split ratios must be non-negative");
    sum += r;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw ValidationError("ratios", "split ratios must sum to 1");
  if (!(target_tolerance >= 0.0 && target_tolerance <= 1.0)) {
    throw ValidationError("target_tolerance", "target tolerance must be a fraction");
  }
}

std::array<std::size_t, 3> split_quotas(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> q{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double exact = static_cast<double>(n) * ratios[j];
    q[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    frac[j] = exact - static_cast<double>(q[j]);
    used += q[j];
  }
  while (used < n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < 3; ++j) {
      if (frac[j] > frac[best] + 1e-12) best = j;
    }
    ++q[best];
    frac[best] = -1.0;
    ++used;
  }
  return q;
}

std::vector<Split> partition_by_key(const std::vector<std::string>& keys, const std::vector<int>& strata,
                                    const SplitSpec& spec) {
  spec.validate();
  if (keys.size() != strata.size()) throw ValidationError("strata", "one stratum per item required");

  struct Group {
    std::vector<std::size_t> members;
    std::size_t stratum;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  std::map<int, std::size_t> stratum_index;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto [it, fresh] = group_of.emplace(keys[i], groups.size());
    if (fresh) {
      auto [sit, _] = stratum_index.emplace(strata[i], stratum_index.size());
      groups.push_back({{}, sit->second});
    }
    groups[it->second].members.push_back(i);
  }
  // Stratum indices follow first appearance; renumber by stratum value so
  // the layout does not depend on record order.
  std::vector<std::size_t> renumber(stratum_index.size());
  {
    std::size_t k = 0;
    for (auto& [value, idx] : stratum_index) renumber[idx] = k++;
  }
  std::vector<std::size_t> stratum_sizes(stratum_index.size(), 0);
  for (auto& g : groups) {
    g.stratum = renumber[g.stratum];
    stratum_sizes[g.stratum] += g.members.size();
  }

  const auto quotas = split_quotas(keys.size(), spec.ratios);
  auto cell_left = stratum_quotas(stratum_sizes, quotas);
  std::array<std::size_t, 3> left = quotas;

  // Seeded shuffle within each stratum, then largest groups first.
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> by_stratum(stratum_sizes.size());
  for (std::size_t g = 0; g < groups.size(); ++g) by_stratum[groups[g].stratum].push_back(g);
  std::vector<std::size_t> order;
  for (auto& members : by_stratum) {
    rng.shuffle(members);
    order.insert(order.end(), members.begin(), members.end());
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return groups[a].members.size() > groups[b].members.size(); });

  std::vector<Split> out(keys.size(), Split::Train);
  for (std::size_t g : order) {
    const std::size_t size = groups[g].members.size();
    const std::size_t s = groups[g].stratum;
    int best = -1;
    auto better = [&](std::size_t j) {
      if (best < 0) return true;
      const auto b = static_cast<std::size_t>(best);
      const bool fits_j = cell_left[s][j] >= size, fits_b = cell_left[s][b] >= size;
      if (fits_j != fits_b) return fits_j;
      if (cell_left[s][j] != cell_left[s][b]) return cell_left[s][j] > cell_left[s][b];
      return left[j] > left[b];
    };
    for (std::size_t j = 0; j < 3; ++j) {
      if (left[j] >= size && better(j)) best = static_cast<int>(j);
    }
    if (best < 0) {
      // Allow one record of overflow before declaring the layout infeasible.
      for (std::size_t j = 0; j < 3; ++j) {
        if (left[j] + 1 >= size && (best < 0 || left[j] > left[static_cast<std::size_t>(best)])) {
          best = static_cast<int>(j);
        }
      }
    }
    if (best < 0) {
      throw ConstraintError("cannot place a group of " + std::to_string(size) + " records sharing hs '" +
                            keys[groups[g].members.front()] + "': largest remaining split capacity is " +
                            std::to_string(std::max({left[0], left[1], left[2]})));
    }
    const auto j = static_cast<std::size_t>(best);
    left[j] -= std::min(left[j], size);
    cell_left[s][j] -= std::min(cell_left[s][j], size);
    for (std::size_t m : groups[g].members) out[m] = kSplits[j];
  }
  return out;
}

namespace {

// Stratifying on the primary target leaves secondary labels of multi-target
// records to chance. Swapping two hs groups of equal size and equal primary
// target between splits keeps split sizes and primary shares intact, so we
// greedily take swaps that shrink the squared per-label share deviation.
void balance_secondary_labels(const std::vector<DatasetRecord>& records, const std::vector<std::string>& keys,
                              std::vector<Split>& assignment) {
  constexpr std::size_t kLabels = kAllTargets.size();
  using Counts = std::array<double, kLabels>;
  struct Group {
    std::vector<std::size_t> members;
    TargetLabel primary;
    Counts labels{};
    std::size_t split = 0;
  };
  std::vector<Group> groups;
  std::unordered_map<std::string, std::size_t> group_of;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, fresh] = group_of.emplace(keys[i], groups.size());
    if (fresh) groups.push_back({{}, records[i].primary_target(), {}, index_of(assignment[i])});
    auto& g = groups[it->second];
    g.members.push_back(i);
    for (TargetLabel t : records[i].targets) g.labels[static_cast<std::size_t>(t)] += 1.0;
  }

  std::array<double, 3> size{};
  Counts global{};
  std::array<Counts, 3> count{};
  for (const auto& g : groups) {
    size[g.split] += static_cast<double>(g.members.size());
    for (std::size_t t = 0; t < kLabels; ++t) {
      global[t] += g.labels[t];
      count[g.split][t] += g.labels[t];
    }
  }
  const double n = static_cast<double>(records.size());
  auto penalty = [&](std::size_t j, std::size_t t, double c) {
    if (size[j] == 0.0) return 0.0;
    const double d = c / size[j] - global[t] / n;
    return d * d;
  };

  // Only groups whose label mix differs from a plain single label can move
  // anything.
  std::vector<std::size_t> mixed;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double total = 0.0;
    for (double c : groups[g].labels) total += c;
    if (total > static_cast<double>(groups[g].members.size())) mixed.push_back(g);
  }
  if (mixed.empty()) return;

  for (int sweep = 0; sweep < 50; ++sweep) {
    bool improved = false;
    for (std::size_t gi : mixed) {
      for (std::size_t h = 0; h < groups.size(); ++h) {
        auto& a = groups[gi];
        auto& b = groups[h];
        if (a.split == b.split || a.primary != b.primary || a.members.size() != b.members.size()) continue;
        if (a.labels == b.labels) continue;
        double delta = 0.0;
        for (std::size_t t = 0; t < kLabels; ++t) {
          const double diff = a.labels[t] - b.labels[t];
          if (diff == 0.0) continue;
          delta += penalty(a.split, t, count[a.split][t] - diff) - penalty(a.split, t, count[a.split][t]);
          delta += penalty(b.split, t, count[b.split][t] + diff) - penalty(b.split, t, count[b.split][t]);
        }
        if (delta >= -1e-15) continue;
        for (std::size_t t = 0; t < kLabels; ++t) {
          const double diff = a.labels[t] - b.labels[t];
          count[a.split][t] -= diff;
          count[b.split][t] += diff;
        }
        std::swap(a.split, b.split);
        improved = true;
      }
    }
    if (!improved) break;
  }
  for (const auto& g : groups) {
    for (std::size_t m : g.members) assignment[m] = kSplits[g.split];
  }
}

}  // namespace

std::vector<DatasetRecord> split_dataset(std::vector<DatasetRecord> records, const SplitSpec& spec) {
  std::vector<std::string> keys;
  std::vector<int> strata;
  keys.reserve(records.size());
  for (const auto& r : records) {
    if (r.split) throw ValidationError("split", "record " + r.id + " is already assigned to a split");
    keys.push_back(hs_key(r.hs));
    strata.push_back(static_cast<int>(r.primary_target()));
  }
  auto assignment = partition_by_key(keys, strata, spec);
  balance_secondary_labels(records, keys, assignment);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].split = assignment[i];
  return records;
}

SplitAudit audit_split(const std::vector<DatasetRecord>& records, const SplitSpec& spec) {
  SplitAudit a;
  a.quotas = split_quotas(records.size(), spec.ratios);
  std::map<std::string, std::set<Split>> hs_splits;
  std::array<std::map<TargetLabel, std::size_t>, 3> per_split;
  std::map<TargetLabel, std::size_t> global;
  for (const auto& r : records) {
    if (!r.split) throw ValidationError("split", "record " + r.id + " has no split");
    const std::size_t j = index_of(*r.split);
    ++a.sizes[j];
    hs_splits[hs_key(r.hs)].insert(*r.split);
    for (TargetLabel t : r.targets) {
      ++per_split[j][t];
      ++global[t];
    }
  }
  for (std::size_t j = 0; j < 3; ++j) {
    const std::size_t dev = a.sizes[j] > a.quotas[j] ? a.sizes[j] - a.quotas[j] : a.quotas[j] - a.sizes[j];
    a.max_size_deviation = std::max(a.max_size_deviation, dev);
  }
  for (const auto& [hs, splits] : hs_splits) {
    if (splits.size() > 1) ++a.cross_split_hs;
  }
  if (!records.empty()) {
    for (const auto& [t, count] : global) {
      const double p = static_cast<double>(count) / static_cast<double>(records.size());
      for (std::size_t j = 0; j < 3; ++j) {
        if (a.sizes[j] == 0) continue;
        auto it = per_split[j].find(t);
        const double q = static_cast<double>(it == per_split[j].end() ? 0 : it->second) /
                         static_cast<double>(a.sizes[j]);
        a.max_target_deviation = std::max(a.max_target_deviation, std::fabs(q - p));
      }
    }
  }
  return a;
}

void LotoConfig::validate() const {
  if (always_in_train.count(left_out)) {
    throw ValidationError("left_out", "left-out target " + std::string(to_string(left_out)) +
                                          " is also marked always-in-train");
  }
  if (!loto_targets.count(left_out)) {
    throw ValidationError("left_out", std::string(to_string(left_out)) + " is not a LOTO target");
  }
  for (TargetLabel t : loto_targets) {
    if (always_in_train.count(t)) {
      throw ValidationError("always_in_train", std::string(to_string(t)) + " cannot be both LOTO and always-in-train");
    }
  }
  if (per_target_quota == 0) throw ValidationError("quota", "per-target quota must be positive");
}

LotoSplit build_loto(const std::vector<DatasetRecord>& records, const LotoConfig& config) {
  config.validate();
  LotoSplit out;
  std::vector<bool> used(records.size(), false);
  std::vector<std::size_t> train_idx;

  auto draw = [&](TargetLabel t, bool for_test) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (used[i] || !records[i].has_target(t)) continue;
      if (!for_test && records[i].has_target(config.left_out)) continue;
      candidates.push_back(i);
    }
    if (candidates.size() < config.per_target_quota) {
      throw ConstraintError("target " + std::string(to_string(t)) + " has " + std::to_string(candidates.size()) +
                            " eligible records, short of the quota " + std::to_string(config.per_target_quota) +
                            " by " + std::to_string(config.per_target_quota - candidates.size()));
    }
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    auto picked = sample_indices(std::move(candidates), config.per_target_quota, rng);
    for (std::size_t i : picked) used[i] = true;
    out.pool_counts[t] = picked.size();
    return picked;
  };

  const auto test_idx = draw(config.left_out, true);
  for (TargetLabel t : kAllTargets) {
    if (t == config.left_out || !config.loto_targets.count(t)) continue;
    auto picked = draw(t, false);
    train_idx.insert(train_idx.end(), picked.begin(), picked.end());
  }
  for (TargetLabel t : kAllTargets) {
    if (!config.always_in_train.count(t)) continue;
    std::size_t n = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (used[i] || !records[i].has_target(t) || records[i].has_target(config.left_out)) continue;
      used[i] = true;
      train_idx.push_back(i);
      ++n;
    }
    out.pool_counts[t] = n;
  }
  // OTHER keeps only single-target records.
  if (!config.always_in_train.count(TargetLabel::Other) && !config.loto_targets.count(TargetLabel::Other)) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (used[i] || r.targets.size() != 1 || r.targets.front() != TargetLabel::Other) continue;
      used[i] = true;
      train_idx.push_back(i);
      ++n;
    }
    out.pool_counts[TargetLabel::Other] = n;
  }

  std::sort(train_idx.begin(), train_idx.end());
  for (std::size_t i : train_idx) {
    out.train.push_back(records[i]);
    out.train.back().split = Split::Train;
  }
  for (std::size_t i : test_idx) {
    out.test.push_back(records[i]);
    out.test.back().split = Split::Test;
  }
  return out;
}

void validate(const ApeTriplet& t) {
  if (blank(t.id)) throw ValidationError("id", "empty triplet id");
  if (blank(t.hs)) throw ValidationError("hs", "triplet " + t.id + ": hs is empty");
  if (blank(t.cn_or)) throw ValidationError("cn_or", "triplet " + t.id + ": cn_or is empty");
  if (blank(t.cn_pe)) throw ValidationError("cn_pe", "triplet " + t.id + ": cn_pe is empty");
}

ApeTriplet triplet_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("row", "expected a JSON object");
  ApeTriplet t;
  t.id = string_field(j, "id");
  t.hs = string_field(j, "hs");
  t.cn_or = string_field(j, "cn_or");
  t.cn_pe = string_field(j, "cn_pe");
  auto star = j.find("cn_pe_star");
  if (star != j.end() && !star->is_null()) {
    if (!star->is_string()) throw ValidationError("cn_pe_star", "field 'cn_pe_star' must be a string or null");
    if (!blank(star->get<std::string>())) t.cn_pe_star = star->get<std::string>();
  }
  validate(t);
  return t;
}

std::vector<ApeTriplet> load_ape_triplets(const std::filesystem::path& path) {
  std::vector<ApeTriplet> out;
  std::vector<std::size_t> lines;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      out.push_back(triplet_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(e.field(), located(path.string(), line, "field '" + e.field() + "': " + e.what()));
    }
    lines.push_back(line);
  });
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!seen.emplace(out[i].id, lines[i]).second) {
      throw ValidationError("id", located(path.string(), lines[i], "duplicate id '" + out[i].id + "'"));
    }
  }
  return out;
}

std::string_view to_string(ApeSource s) { return s == ApeSource::Original ? "cn_or" : "cn_pe_star"; }

nlohmann::json to_json(const ApePair& p) {
  return {{"id", p.id},         {"hs", p.hs},
          {"source_cn", p.source_cn}, {"cn_pe", p.cn_pe},
          {"source", std::string(to_string(p.source))}, {"split", std::string(to_string(p.split))},
          {"ter", p.ter}};
}

std::array<std::size_t, 3> ApeCorpus::counts() const {
  std::array<std::size_t, 3> c{};
  for (const auto& p : pairs) ++c[index_of(p.split)];
  return c;
}

double text_ter(std::string_view candidate, std::string_view reference) {
  return text::ter(text::tokenize(candidate), text::tokenize(reference));
}

namespace {

// Scores every (source, post-edit) pair on a few threads, then emits in
// triplet order so the output does not depend on scheduling.
ApeCorpus emit_pairs(const std::vector<ApeTriplet>& triplets, const TerFn& ter_fn, const std::vector<Split>& splits) {
  struct Task {
    std::size_t triplet;
    ApeSource kind;
    const std::string* text;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    validate(t);
    tasks.push_back({i, ApeSource::Original, &t.cn_or});
    // An intermediate edit identical to the original adds no new pair.
    if (t.cn_pe_star && *t.cn_pe_star != t.cn_or) tasks.push_back({i, ApeSource::IntermediateEdit, &*t.cn_pe_star});
  }

  std::vector<double> scores(tasks.size());
  const std::size_t workers =
      std::clamp<std::size_t>(tasks.size() / 256, 1, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t k = w; k < tasks.size(); k += workers) {
        scores[k] = ter_fn(*tasks[k].text, triplets[tasks[k].triplet].cn_pe);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work, w);
  work(0);
  for (auto& th : threads) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ApeCorpus corpus;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (!(scores[k] > 0.0)) {
      ++corpus.dropped_zero_ter;
      continue;
    }
    const auto& t = triplets[tasks[k].triplet];
    ApePair p;
    p.id = t.id + (tasks[k].kind == ApeSource::Original ? "/or" : "/pe_star");
    p.hs = t.hs;
    p.source_cn = *tasks[k].text;
    p.cn_pe = t.cn_pe;
    p.source = tasks[k].kind;
    p.split = splits[tasks[k].triplet];
    p.ter = scores[k];
    corpus.pairs.push_back(std::move(p));
  }
  return corpus;
}

}  // namespace

ApeCorpus build_ape_corpus(const std::vector<ApeTriplet>& triplets, const TerFn& ter_fn, const SplitSpec& spec) {
  std::vector<std::string> keys;
  keys.reserve(triplets.size());
  for (const auto& t : triplets) keys.push_back(hs_key(t.hs));
  const std::vector<int> strata(triplets.size(), 0);
  return emit_pairs(triplets, ter_fn, partition_by_key(keys, strata, spec));
}

ApeCorpus build_ape_corpus(const std::vector<ApeTriplet>& triplets, const TerFn& ter_fn,
                           const std::map<std::string, Split>& hs_partition) {
  std::vector<Split> splits;
  std::vector<std::string> missing;
  for (const auto& t : triplets) {
    auto it = hs_partition.find(hs_key(t.hs));
    if (it == hs_partition.end()) {
      missing.push_back(t.id);
      splits.push_back(Split::Train);
    } else {
      splits.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) ids += (i ? "," : "") + missing[i];
    throw ValidationError("hs", std::to_string(missing.size()) + " triplets have an hs absent from the partition: " + ids);
  }
  return emit_pairs(triplets, ter_fn, splits);
}

std::map<std::string, Split> hs_partition_of(const std::vector<DatasetRecord>& split_records) {
  std::map<std::string, Split> out;
  for (const auto& r : split_records) {
    if (!r.split) throw ValidationError("split", "record " + r.id + " has no split");
    auto [it, fresh] = out.emplace(hs_key(r.hs), *r.split);
    if (!fresh && it->second != *r.split) {
      throw ConstraintError("hs of record " + r.id + " appears in two splits");
    }
  }
  return out;
}

}  // namespace cnkit::corpus
