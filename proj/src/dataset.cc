// Copyright 2026 The seqrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "seqrec/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "seqrec/errors.h"
#include "seqrec/hash.h"

namespace seqrec {
namespace {

using json = nlohmann::json;

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool ParseTimestamp(std::string_view text, int64_t* out) {
  const std::string t = Trim(text);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), *out);
  return ec == std::errc() && ptr == t.data() + t.size() && *out >= 0;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(Trim(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(Trim(field));
  return fields;
}

void CheckMalformedRatio(const IngestResult& result, size_t total,
                         const std::string& source) {
  if (total > 0 && 2 * result.malformed > total) {
    std::ostringstream msg;
    msg << source << ": " << result.malformed << " of " << total
        << " rows are malformed";
    if (!result.malformed_lines.empty()) {
      msg << " (first at line " << result.malformed_lines.front() << ")";
    }
    throw FormatError(msg.str());
  }
}

bool JsonId(const json& v, std::string* out) {
  if (v.is_string()) {
    *out = v.get<std::string>();
    return !out->empty();
  }
  if (v.is_number_integer()) {
    *out = std::to_string(v.get<int64_t>());
    return true;
  }
  return false;
}

}  // namespace

InputFormat ParseInputFormat(const std::string& name) {
  if (name == "csv") return InputFormat::kCsv;
  if (name == "jsonl") return InputFormat::kJsonl;
  throw ConfigError("unknown input format '" + name + "' (expected csv or jsonl)");
}

IngestResult ParseCsv(std::istream& in, const std::string& source) {
  IngestResult result;
  std::string line;
  size_t line_no = 0;
  int col_user = -1, col_item = -1, col_time = -1;
  size_t header_width = 0;
  bool have_header = false;
  size_t total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    std::vector<std::string> fields = SplitCsvLine(line);
    if (!have_header) {
      for (size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "user") col_user = static_cast<int>(i);
        if (fields[i] == "item") col_item = static_cast<int>(i);
        if (fields[i] == "timestamp") col_time = static_cast<int>(i);
      }
      if (col_user < 0 || col_item < 0 || col_time < 0) {
        throw FormatError(source + ":" + std::to_string(line_no) +
                          ": header must name user, item and timestamp");
      }
      header_width = fields.size();
      have_header = true;
      continue;
    }
    ++total;
    Interaction row;
    bool ok = fields.size() == header_width;
    if (ok) {
      row.user = fields[col_user];
      row.item = fields[col_item];
      ok = !row.user.empty() && !row.item.empty() &&
           ParseTimestamp(fields[col_time], &row.timestamp);
    }
    if (ok) {
      result.rows.push_back(std::move(row));
    } else {
      ++result.malformed;
      result.malformed_lines.push_back(line_no);
    }
  }
  CheckMalformedRatio(result, total, source);
  return result;
}

IngestResult ParseJsonl(std::istream& in, const std::string& source) {
  IngestResult result;
  std::string line;
  size_t line_no = 0;
  size_t total = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    ++total;
    Interaction row;
    bool ok = false;
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_object() && obj.contains("user") && obj.contains("item") &&
        obj.contains("timestamp")) {
      const json& ts = obj["timestamp"];
      ok = JsonId(obj["user"], &row.user) && JsonId(obj["item"], &row.item);
      if (ok && ts.is_number_integer()) {
        row.timestamp = ts.get<int64_t>();
        ok = row.timestamp >= 0;
      } else if (ok && ts.is_string()) {
        ok = ParseTimestamp(ts.get<std::string>(), &row.timestamp);
      } else {
        ok = false;
      }
    }
    if (ok) {
      result.rows.push_back(std::move(row));
    } else {
      ++result.malformed;
      result.malformed_lines.push_back(line_no);
    }
  }
  CheckMalformedRatio(result, total, source);
  return result;
}

IngestResult Ingest(const std::string& path, InputFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read interaction log '" + path + "'");
  return format == InputFormat::kCsv ? ParseCsv(in, path)
                                     : ParseJsonl(in, path);
}

int32_t Catalog::Add(const std::string& id) {
  auto [it, inserted] =
      index_.emplace(id, static_cast<int32_t>(ids_.size()));
  if (inserted) ids_.push_back(id);
  return it->second;
}

int32_t Catalog::Find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? -1 : it->second;
}

int32_t Catalog::IndexOf(const std::string& id) const {
  const int32_t idx = Find(id);
  if (idx < 0) throw IndexError("unknown item '" + id + "'");
  return idx;
}

const std::string& Catalog::ItemOf(int32_t index) const {
  if (index < 0 || static_cast<size_t>(index) >= ids_.size()) {
    throw IndexError("item index " + std::to_string(index) +
                     " outside catalog of " + std::to_string(ids_.size()));
  }
  return ids_[index];
}

uint64_t Catalog::Hash() const {
  Fnv1a h;
  h.String("catalog").U64(ids_.size());
  for (const auto& id : ids_) h.String(id);
  return h.digest();
}

uint64_t Dataset::Hash() const {
  Fnv1a h;
  h.String("dataset").U64(catalog.Hash()).U64(sequences.size());
  for (const auto& s : sequences) h.String(s.user).Ints(s.items);
  return h.digest();
}

size_t Dataset::num_interactions() const {
  size_t n = 0;
  for (const auto& s : sequences) n += s.items.size();
  return n;
}

Dataset BuildSequences(const std::vector<Interaction>& interactions,
                       size_t min_actions) {
  std::vector<std::string> user_order;
  std::unordered_map<std::string, std::vector<size_t>> rows_by_user;
  for (size_t i = 0; i < interactions.size(); ++i) {
    auto [it, inserted] = rows_by_user.try_emplace(interactions[i].user);
    if (inserted) user_order.push_back(interactions[i].user);
    it->second.push_back(i);
  }
  Dataset ds;
  std::vector<const std::vector<size_t>*> kept;
  std::vector<std::string> kept_users;
  for (const auto& user : user_order) {
    std::vector<size_t>& rows = rows_by_user[user];
    if (rows.size() < min_actions) continue;
    std::stable_sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
      return interactions[a].timestamp < interactions[b].timestamp;
    });
    kept.push_back(&rows);
    kept_users.push_back(user);
  }
  if (kept.empty()) {
    throw EmptyDatasetError("no user has at least " +
                            std::to_string(min_actions) + " interactions");
  }
  // Catalog indices follow first appearance in the input among survivors.
  std::vector<size_t> surviving;
  for (const auto* rows : kept) surviving.insert(surviving.end(), rows->begin(), rows->end());
  std::sort(surviving.begin(), surviving.end());
  for (size_t i : surviving) ds.catalog.Add(interactions[i].item);
  for (size_t u = 0; u < kept.size(); ++u) {
    UserSequence seq;
    seq.user = kept_users[u];
    for (size_t i : *kept[u]) seq.items.push_back(ds.catalog.IndexOf(interactions[i].item));
    ds.sequences.push_back(std::move(seq));
  }
  ds.train_popularity.assign(ds.catalog.size(), 0);
  return ds;
}

std::vector<int32_t> LeaveOneOutSplit::TestHistory(size_t u) const {
  std::vector<int32_t> h = users[u].train;
  h.push_back(users[u].valid);
  return h;
}

LeaveOneOutSplit SplitLeaveOneOut(Dataset* dataset) {
  LeaveOneOutSplit split;
  split.users.reserve(dataset->sequences.size());
  for (const auto& seq : dataset->sequences) {
    const size_t n = seq.items.size();
    if (n < 3) {
      throw PreconditionError("user '" + seq.user + "' has " +
                              std::to_string(n) +
                              " items; leave-one-out needs at least 3");
    }
    UserSplit s;
    s.train.assign(seq.items.begin(), seq.items.end() - 2);
    s.valid = seq.items[n - 2];
    s.test = seq.items[n - 1];
    split.users.push_back(std::move(s));
  }
  dataset->train_popularity =
      CountPopularity(TrainSequences(split), dataset->catalog.size());
  return split;
}

std::vector<int64_t> CountPopularity(
    const std::vector<std::vector<int32_t>>& sequences, size_t num_items) {
  std::vector<int64_t> counts(num_items, 0);
  for (const auto& s : sequences) {
    for (int32_t i : s) ++counts.at(i);
  }
  return counts;
}

std::vector<int64_t> FullLogPopularity(const Dataset& dataset) {
  std::vector<int64_t> counts(dataset.catalog.size(), 0);
  for (const auto& s : dataset.sequences) {
    for (int32_t i : s.items) ++counts.at(i);
  }
  return counts;
}

std::vector<std::vector<int32_t>> TrainSequences(const LeaveOneOutSplit& split) {
  std::vector<std::vector<int32_t>> out;
  out.reserve(split.users.size());
  for (const auto& u : split.users) out.push_back(u.train);
  return out;
}

PopularityPartition PartitionHeadTail(std::span<const int64_t> popularity,
                                      double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ParameterError("tail ratio tau must lie in (0, 1), got " +
                         std::to_string(tau));
  }
  const size_t n = popularity.size();
  std::vector<int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    if (popularity[a] != popularity[b]) return popularity[a] > popularity[b];
    return a < b;
  });
  const size_t tail_size =
      std::min(n, static_cast<size_t>(std::ceil(tau * static_cast<double>(n) - 1e-9)));
  PopularityPartition p;
  p.tau = tau;
  p.is_tail.assign(n, false);
  for (size_t r = n - tail_size; r < n; ++r) {
    p.is_tail[order[r]] = true;
    p.threshold_count = std::max(p.threshold_count, popularity[order[r]]);
  }
  for (size_t i = 0; i < n; ++i) {
    (p.is_tail[i] ? p.tail : p.head).push_back(static_cast<int32_t>(i));
  }
  return p;
}

std::map<int32_t, ContextSet> ExtractContextSets(
    const std::vector<std::vector<int32_t>>& sequences,
    std::span<const int32_t> items, size_t left, size_t right) {
  std::map<int32_t, ContextSet> out;
  for (int32_t item : items) out[item].item = item;
  for (size_t s = 0; s < sequences.size(); ++s) {
    const auto& seq = sequences[s];
    for (size_t p = 0; p < seq.size(); ++p) {
      auto it = out.find(seq[p]);
      if (it == out.end()) continue;
      ContextWindow w;
      w.target = seq[p];
      w.sequence = s;
      w.position = p;
      const size_t lo = p >= left ? p - left : 0;
      const size_t hi = std::min(seq.size(), p + 1 + right);
      w.left.assign(seq.begin() + lo, seq.begin() + p);
      w.right.assign(seq.begin() + p + 1, seq.begin() + hi);
      it->second.windows.push_back(std::move(w));
    }
  }
  return out;
}

NegativeSampler::NegativeSampler(std::vector<double> weights)
    : weights_(std::move(weights)) {
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ParameterError("negative-sampling weights must be finite and >= 0");
    }
  }
}

std::vector<int32_t> NegativeSampler::Sample(std::span<const int32_t> excluded,
                                             size_t n, Rng& rng) const {
  std::vector<bool> blocked(weights_.size(), false);
  for (int32_t e : excluded) {
    if (e >= 0 && static_cast<size_t>(e) < blocked.size()) blocked[e] = true;
  }
  // Key log(u) / w orders items so that the top n form a weighted sample
  // without replacement.
  std::vector<std::pair<double, int32_t>> weighted, unweighted;
  for (size_t i = 0; i < weights_.size(); ++i) {
    if (blocked[i]) continue;
    const double u = 1.0 - rng.Uniform();
    if (weights_[i] > 0.0) {
      weighted.emplace_back(std::log(u) / weights_[i], static_cast<int32_t>(i));
    } else {
      unweighted.emplace_back(u, static_cast<int32_t>(i));
    }
  }
  if (weighted.size() + unweighted.size() < n) {
    throw SamplingError("only " +
                        std::to_string(weighted.size() + unweighted.size()) +
                        " eligible negatives, " + std::to_string(n) +
                        " requested");
  }
  auto by_key = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::vector<int32_t> out;
  out.reserve(n);
  const size_t from_weighted = std::min(n, weighted.size());
  std::partial_sort(weighted.begin(), weighted.begin() + from_weighted,
                    weighted.end(), by_key);
  for (size_t i = 0; i < from_weighted; ++i) out.push_back(weighted[i].second);
  const size_t rest = n - from_weighted;
  std::partial_sort(unweighted.begin(), unweighted.begin() + rest,
                    unweighted.end(), by_key);
  for (size_t i = 0; i < rest; ++i) out.push_back(unweighted[i].second);
  return out;
}

NegativePopularity ParseNegativePopularity(const std::string& name) {
  if (name == "full_log") return NegativePopularity::kFullLog;
  if (name == "test_items") return NegativePopularity::kTestItems;
  throw ConfigError("unknown negative popularity source '" + name +
                    "' (expected full_log or test_items)");
}

std::string NegativePopularityName(NegativePopularity p) {
  return p == NegativePopularity::kFullLog ? "full_log" : "test_items";
}

std::vector<double> NegativeWeights(const Dataset& dataset,
                                    const LeaveOneOutSplit& split,
                                    NegativePopularity source) {
  std::vector<double> w(dataset.catalog.size(), 0.0);
  if (source == NegativePopularity::kFullLog) {
    std::vector<int64_t> counts = FullLogPopularity(dataset);
    for (size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(counts[i]);
  } else {
    for (const auto& u : split.users) w.at(u.test) += 1.0;
  }
  return w;
}

DatasetStats ComputeStats(const Dataset& dataset) {
  DatasetStats s;
  s.users = dataset.sequences.size();
  s.items = dataset.catalog.size();
  s.interactions = dataset.num_interactions();
  s.avg_actions_per_user =
      s.users ? static_cast<double>(s.interactions) / s.users : 0.0;
  return s;
}

void SaveDataset(const Dataset& dataset, const std::string& path) {
  json j;
  j["format"] = "seqrec-dataset";
  j["version"] = 1;
  j["hash"] = Fnv1a::ToHex(dataset.Hash());
  j["items"] = dataset.catalog.ids();
  json users = json::array();
  for (const auto& s : dataset.sequences) {
    users.push_back({{"user", s.user}, {"items", s.items}});
  }
  j["users"] = std::move(users);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset store '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing dataset store '" + path + "'");
}

Dataset LoadDataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset store '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() ||
      j.value("format", "") != "seqrec-dataset") {
    throw FormatError("'" + path + "' is not a dataset store");
  }
  Dataset ds;
  try {
    for (const auto& id : j.at("items")) ds.catalog.Add(id.get<std::string>());
    for (const auto& u : j.at("users")) {
      UserSequence s;
      s.user = u.at("user").get<std::string>();
      s.items = u.at("items").get<std::vector<int32_t>>();
      for (int32_t i : s.items) ds.catalog.ItemOf(i);
      ds.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed dataset store '" + path + "': " + e.what());
  }
  if (ds.sequences.empty()) throw EmptyDatasetError("dataset store has no users");
  if (j.value("hash", "") != Fnv1a::ToHex(ds.Hash())) {
    throw FormatError("dataset store '" + path + "' fails its content hash");
  }
  ds.train_popularity.assign(ds.catalog.size(), 0);
  return ds;
}

}  // namespace seqrec
