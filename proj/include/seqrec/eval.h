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

// Leave-one-out ranking evaluation (HR@5, HR@10, MRR by head/tail group of
// the ground truth) and the non-learned baselines.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "seqrec/dataset.h"

namespace seqrec {

class SequenceModel;

double HitRatio(size_t rank, size_t k);
double ReciprocalRank(size_t rank);

// 1-based rank of candidates[truth_pos] when candidates are ordered by
// descending score with ties broken by ascending item index.
size_t RankOfTruth(std::span<const double> scores,
                   std::span<const int32_t> candidates, size_t truth_pos);

struct GroupMetrics {
  double hr5 = 0.0;
  double hr10 = 0.0;
  double mrr = 0.0;
  size_t support = 0;
};

struct MetricsReport {
  GroupMetrics head;
  GroupMetrics tail;
  GroupMetrics all;
  // Ground truth is a head item and the input history holds a tail item.
  GroupMetrics head_with_tail;
};

// Order-independent sums; Finish() divides by supports.
class MetricsAccumulator {
 public:
  void Add(size_t rank, bool truth_is_tail, bool history_has_tail);
  void Merge(const MetricsAccumulator& other);
  MetricsReport Finish() const;

 private:
  struct Sums {
    double hr5 = 0, hr10 = 0, rr = 0;
    size_t n = 0;
    void Add(size_t rank);
    GroupMetrics Mean() const;
  };
  Sums head_, tail_, all_, slice_;
};

nlohmann::json ReportToJson(const MetricsReport& report);
// after - before for every metric; supports are copied from `after`.
nlohmann::json ReportDelta(const MetricsReport& before,
                           const MetricsReport& after);

// Scores candidate items for one user given the input history.
using ScoreFn = std::function<std::vector<double>(
    size_t user, std::span<const int32_t> history,
    std::span<const int32_t> candidates)>;

struct EvalConfig {
  size_t n_negatives = 100;
  uint64_t seed = 0;
  NegativePopularity negative_source = NegativePopularity::kFullLog;
  // Validation mode ranks the validation item from the train prefix.
  bool validation = false;
  // Inputs longer than this keep their most recent items (0 = unlimited).
  size_t max_history = 0;
};

struct UserOutcome {
  size_t user = 0;
  int32_t truth = -1;
  size_t rank = 0;
};

// Negatives for user u depend only on (seed, u, mode), so different scorers
// see identical candidate sets.
std::vector<int32_t> CandidatesFor(const NegativeSampler& sampler,
                                   const Dataset& dataset,
                                   const LeaveOneOutSplit& split, size_t u,
                                   const EvalConfig& config);

MetricsReport Evaluate(const ScoreFn& score, const Dataset& dataset,
                       const LeaveOneOutSplit& split,
                       const PopularityPartition& partition,
                       const EvalConfig& config,
                       std::vector<UserOutcome>* outcomes = nullptr);

ScoreFn ModelScorer(const SequenceModel& model);

// ---- baselines --------------------------------------------------------------

// All rankings order every item; ties fall back to ascending index.
std::vector<int32_t> PopRanking(std::span<const int64_t> popularity);
// In-sequence count first, then global popularity.
std::vector<int32_t> SPopRanking(std::span<const int32_t> sequence,
                                 std::span<const int64_t> popularity);

class TransitionCounts {
 public:
  TransitionCounts() = default;
  static TransitionCounts FromSequences(
      const std::vector<std::vector<int32_t>>& sequences);
  int64_t Count(int32_t from, int32_t to) const;
  bool HasSource(int32_t from) const { return counts_.count(from) > 0; }

 private:
  std::unordered_map<int32_t, std::unordered_map<int32_t, int64_t>> counts_;
};

// count(last -> j) first, then global popularity. An unseen last item gives
// the POP ranking.
std::vector<int32_t> FomcRanking(int32_t last, const TransitionCounts& counts,
                                 std::span<const int64_t> popularity);

// Reorders a pre-ranked list ascending by popularity (stable) and returns
// the first k. Throws PreconditionError if the list is shorter than k.
std::vector<int32_t> RerankByPopularity(std::span<const int32_t> pre_ranked,
                                        size_t k,
                                        std::span<const int64_t> popularity);

enum class Baseline { kPop, kSPop, kFomc };
Baseline ParseBaseline(const std::string& name);

ScoreFn BaselineScorer(Baseline baseline, std::span<const int64_t> popularity,
                       const TransitionCounts* transitions);

// Applies popularity reranking to any scorer: its top `list_size`
// candidates are reordered ascending by popularity and placed first, the
// rest keep their base order.
ScoreFn RerankedScorer(ScoreFn base, std::span<const int64_t> popularity,
                       size_t list_size = 50);

}  // namespace seqrec
