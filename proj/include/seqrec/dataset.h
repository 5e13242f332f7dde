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

// Interaction logs to per-user sequences, the leave-one-out split, popularity
// statistics, head/tail partitioning, context windows and evaluation
// negatives.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrec/rng.h"

namespace seqrec {

struct Interaction {
  std::string user;
  std::string item;
  int64_t timestamp = 0;
};

enum class InputFormat { kCsv, kJsonl };
InputFormat ParseInputFormat(const std::string& name);

struct IngestResult {
  std::vector<Interaction> rows;
  size_t malformed = 0;
  // 1-based line numbers of rejected rows, for reporting.
  std::vector<size_t> malformed_lines;
};

// CSV needs a header naming user, item and timestamp (any column order).
// JSONL needs one object per line with those keys; user and item may be
// strings or integers. Blank lines are ignored. Throws IoError when the file
// cannot be read and FormatError when more than half the rows are malformed.
IngestResult Ingest(const std::string& path, InputFormat format);
IngestResult ParseCsv(std::istream& in, const std::string& source);
IngestResult ParseJsonl(std::istream& in, const std::string& source);

// Dense item indices. Indices are assigned in order of first appearance and
// never change afterwards.
class Catalog {
 public:
  int32_t Add(const std::string& id);
  // -1 when unknown.
  int32_t Find(const std::string& id) const;
  // Throws IndexError when unknown.
  int32_t IndexOf(const std::string& id) const;
  const std::string& ItemOf(int32_t index) const;
  size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  uint64_t Hash() const;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int32_t> index_;
};

struct UserSequence {
  std::string user;
  std::vector<int32_t> items;
};

struct Dataset {
  Catalog catalog;
  std::vector<UserSequence> sequences;
  // Training-portion counts; filled by SplitLeaveOneOut.
  std::vector<int64_t> train_popularity;

  uint64_t Hash() const;
  size_t num_interactions() const;
};

// Drops users with fewer than min_actions interactions, orders each user's
// items by timestamp (stable on ties) and builds the catalog over the
// survivors. Users appear in order of first appearance. Throws
// EmptyDatasetError when nobody survives.
Dataset BuildSequences(const std::vector<Interaction>& interactions,
                       size_t min_actions = 5);

struct UserSplit {
  std::vector<int32_t> train;
  int32_t valid = -1;
  int32_t test = -1;
};

struct LeaveOneOutSplit {
  std::vector<UserSplit> users;

  // train plus the validation item, the input used for test prediction.
  std::vector<int32_t> TestHistory(size_t u) const;
};

// Last item to test, second to last to validation. Recomputes
// dataset->train_popularity from the train portions. Throws
// PreconditionError naming the user for sequences shorter than 3.
LeaveOneOutSplit SplitLeaveOneOut(Dataset* dataset);

std::vector<int64_t> CountPopularity(
    const std::vector<std::vector<int32_t>>& sequences, size_t num_items);
std::vector<int64_t> FullLogPopularity(const Dataset& dataset);

struct PopularityPartition {
  double tau = 0.5;
  std::vector<int32_t> head;  // ascending index
  std::vector<int32_t> tail;  // ascending index
  std::vector<bool> is_tail;
  // Largest training count among tail items.
  int64_t threshold_count = 0;

  bool IsTail(int32_t item) const { return is_tail[item]; }
};

// Orders items by popularity descending, ties by ascending index, and puts
// the last ceil(tau * n) in the tail. Throws ParameterError unless
// 0 < tau < 1.
PopularityPartition PartitionHeadTail(std::span<const int64_t> popularity,
                                      double tau);

struct ContextWindow {
  std::vector<int32_t> left;
  int32_t target = -1;
  std::vector<int32_t> right;
  // Source sequence and the target's offset in it.
  size_t sequence = 0;
  size_t position = 0;

  size_t length() const { return left.size() + 1 + right.size(); }
};

struct ContextSet {
  int32_t item = -1;
  std::vector<ContextWindow> windows;
};

// One window per occurrence of each requested item, with up to `left` items
// before and `right` items after it, truncated at sequence boundaries.
// Windows appear in (sequence, position) order. Requested items without
// occurrences map to empty sets.
std::map<int32_t, ContextSet> ExtractContextSets(
    const std::vector<std::vector<int32_t>>& sequences,
    std::span<const int32_t> items, size_t left, size_t right);

std::vector<std::vector<int32_t>> TrainSequences(const LeaveOneOutSplit& split);

// Weighted sampling without replacement (exponential-key method) over items
// with positive weight; zero-weight eligible items fill the remainder
// uniformly at random.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::vector<double> weights);

  // n distinct items not in `excluded` (which must include the ground truth
  // and everything the user consumed). Throws SamplingError when fewer than
  // n items are eligible.
  std::vector<int32_t> Sample(std::span<const int32_t> excluded, size_t n,
                              Rng& rng) const;
  size_t num_items() const { return weights_.size(); }

 private:
  std::vector<double> weights_;
};

enum class NegativePopularity { kFullLog, kTestItems };
NegativePopularity ParseNegativePopularity(const std::string& name);
std::string NegativePopularityName(NegativePopularity p);

std::vector<double> NegativeWeights(const Dataset& dataset,
                                    const LeaveOneOutSplit& split,
                                    NegativePopularity source);

struct DatasetStats {
  size_t users = 0;
  size_t items = 0;
  size_t interactions = 0;
  double avg_actions_per_user = 0.0;
};
DatasetStats ComputeStats(const Dataset& dataset);

// Self-describing JSON store: item ids in index order and user sequences.
void SaveDataset(const Dataset& dataset, const std::string& path);
Dataset LoadDataset(const std::string& path);

}  // namespace seqrec
