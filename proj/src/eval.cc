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

#include "seqrec/eval.h"

#include <algorithm>
#include <numeric>

#include "seqrec/errors.h"
#include "seqrec/model.h"

namespace seqrec {

using json = nlohmann::json;

double HitRatio(size_t rank, size_t k) { return rank <= k ? 1.0 : 0.0; }

double ReciprocalRank(size_t rank) { return 1.0 / static_cast<double>(rank); }

size_t RankOfTruth(std::span<const double> scores,
                   std::span<const int32_t> candidates, size_t truth_pos) {
  if (scores.size() != candidates.size() || truth_pos >= scores.size()) {
    throw DimensionError("score list does not match candidates");
  }
  const double st = scores[truth_pos];
  const int32_t it = candidates[truth_pos];
  size_t rank = 1;
  for (size_t c = 0; c < scores.size(); ++c) {
    if (c == truth_pos) continue;
    if (scores[c] > st || (scores[c] == st && candidates[c] < it)) ++rank;
  }
  return rank;
}

void MetricsAccumulator::Sums::Add(size_t rank) {
  hr5 += HitRatio(rank, 5);
  hr10 += HitRatio(rank, 10);
  rr += ReciprocalRank(rank);
  ++n;
}

GroupMetrics MetricsAccumulator::Sums::Mean() const {
  GroupMetrics g;
  g.support = n;
  if (n == 0) return g;
  g.hr5 = hr5 / n;
  g.hr10 = hr10 / n;
  g.mrr = rr / n;
  return g;
}

void MetricsAccumulator::Add(size_t rank, bool truth_is_tail,
                             bool history_has_tail) {
  all_.Add(rank);
  if (truth_is_tail) {
    tail_.Add(rank);
  } else {
    head_.Add(rank);
    if (history_has_tail) slice_.Add(rank);
  }
}

void MetricsAccumulator::Merge(const MetricsAccumulator& other) {
  for (auto [mine, theirs] :
       {std::pair{&head_, &other.head_}, std::pair{&tail_, &other.tail_},
        std::pair{&all_, &other.all_}, std::pair{&slice_, &other.slice_}}) {
    mine->hr5 += theirs->hr5;
    mine->hr10 += theirs->hr10;
    mine->rr += theirs->rr;
    mine->n += theirs->n;
  }
}

MetricsReport MetricsAccumulator::Finish() const {
  return {head_.Mean(), tail_.Mean(), all_.Mean(), slice_.Mean()};
}

namespace {

json GroupJson(const GroupMetrics& g) {
  return {{"hr5", g.hr5}, {"hr10", g.hr10}, {"mrr", g.mrr},
          {"support", g.support}};
}

}  // namespace

json ReportToJson(const MetricsReport& r) {
  return {{"head", GroupJson(r.head)},
          {"tail", GroupJson(r.tail)},
          {"all", GroupJson(r.all)},
          {"slice_head_with_tail",
           {{"hr10", r.head_with_tail.hr10},
            {"support", r.head_with_tail.support}}}};
}

json ReportDelta(const MetricsReport& before, const MetricsReport& after) {
  auto delta = [](const GroupMetrics& b, const GroupMetrics& a) {
    return json{{"hr5", a.hr5 - b.hr5},
                {"hr10", a.hr10 - b.hr10},
                {"mrr", a.mrr - b.mrr},
                {"support", a.support}};
  };
  return {{"head", delta(before.head, after.head)},
          {"tail", delta(before.tail, after.tail)},
          {"all", delta(before.all, after.all)},
          {"slice_head_with_tail",
           {{"hr10", after.head_with_tail.hr10 - before.head_with_tail.hr10},
            {"support", after.head_with_tail.support}}}};
}

std::vector<int32_t> CandidatesFor(const NegativeSampler& sampler,
                                   const Dataset& dataset,
                                   const LeaveOneOutSplit& split, size_t u,
                                   const EvalConfig& config) {
  const UserSplit& s = split.users[u];
  const int32_t truth = config.validation ? s.valid : s.test;
  Rng rng(DeriveSeed(config.seed, u, config.validation ? 1 : 0));
  std::vector<int32_t> out = {truth};
  std::vector<int32_t> negatives =
      sampler.Sample(dataset.sequences[u].items, config.n_negatives, rng);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

MetricsReport Evaluate(const ScoreFn& score, const Dataset& dataset,
                       const LeaveOneOutSplit& split,
                       const PopularityPartition& partition,
                       const EvalConfig& config,
                       std::vector<UserOutcome>* outcomes) {
  NegativeSampler sampler(
      NegativeWeights(dataset, split, config.negative_source));
  MetricsAccumulator acc;
  for (size_t u = 0; u < split.users.size(); ++u) {
    std::vector<int32_t> history =
        config.validation ? split.users[u].train : split.TestHistory(u);
    if (config.max_history > 0 && history.size() > config.max_history) {
      history.erase(history.begin(),
                    history.end() - static_cast<ptrdiff_t>(config.max_history));
    }
    if (history.empty()) continue;
    std::vector<int32_t> candidates =
        CandidatesFor(sampler, dataset, split, u, config);
    std::vector<double> scores = score(u, history, candidates);
    const size_t rank = RankOfTruth(scores, candidates, 0);
    const int32_t truth = candidates[0];
    const bool has_tail =
        std::any_of(history.begin(), history.end(),
                    [&](int32_t i) { return partition.IsTail(i); });
    acc.Add(rank, partition.IsTail(truth), has_tail);
    if (outcomes) outcomes->push_back({u, truth, rank});
  }
  return acc.Finish();
}

ScoreFn ModelScorer(const SequenceModel& model) {
  return [&model](size_t, std::span<const int32_t> history,
                  std::span<const int32_t> candidates) {
    return model.ScoreItems(model.InferUserState(history), candidates);
  };
}

namespace {

// Stable ordering of all items by a descending key, ties by ascending index.
template <typename Key>
std::vector<int32_t> OrderBy(size_t n, Key key) {
  std::vector<int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int32_t a, int32_t b) { return key(a) > key(b); });
  return order;
}

}  // namespace

std::vector<int32_t> PopRanking(std::span<const int64_t> popularity) {
  return OrderBy(popularity.size(),
                 [&](int32_t i) { return popularity[i]; });
}

std::vector<int32_t> SPopRanking(std::span<const int32_t> sequence,
                                 std::span<const int64_t> popularity) {
  std::vector<int64_t> local(popularity.size(), 0);
  for (int32_t i : sequence) ++local.at(i);
  return OrderBy(popularity.size(), [&](int32_t i) {
    return std::pair{local[i], popularity[i]};
  });
}

TransitionCounts TransitionCounts::FromSequences(
    const std::vector<std::vector<int32_t>>& sequences) {
  TransitionCounts t;
  for (const auto& s : sequences) {
    for (size_t p = 1; p < s.size(); ++p) ++t.counts_[s[p - 1]][s[p]];
  }
  return t;
}

int64_t TransitionCounts::Count(int32_t from, int32_t to) const {
  auto it = counts_.find(from);
  if (it == counts_.end()) return 0;
  auto jt = it->second.find(to);
  return jt == it->second.end() ? 0 : jt->second;
}

std::vector<int32_t> FomcRanking(int32_t last, const TransitionCounts& counts,
                                 std::span<const int64_t> popularity) {
  return OrderBy(popularity.size(), [&](int32_t i) {
    return std::pair{counts.Count(last, i), popularity[i]};
  });
}

std::vector<int32_t> RerankByPopularity(std::span<const int32_t> pre_ranked,
                                        size_t k,
                                        std::span<const int64_t> popularity) {
  if (pre_ranked.size() < k) {
    throw PreconditionError("reranking needs at least " + std::to_string(k) +
                            " candidates, got " +
                            std::to_string(pre_ranked.size()));
  }
  std::vector<int32_t> out(pre_ranked.begin(), pre_ranked.end());
  std::stable_sort(out.begin(), out.end(), [&](int32_t a, int32_t b) {
    return popularity[a] < popularity[b];
  });
  out.resize(k);
  return out;
}

Baseline ParseBaseline(const std::string& name) {
  if (name == "pop") return Baseline::kPop;
  if (name == "spop") return Baseline::kSPop;
  if (name == "fomc") return Baseline::kFomc;
  throw ConfigError("unknown baseline '" + name +
                    "' (expected pop, spop or fomc)");
}

ScoreFn BaselineScorer(Baseline baseline, std::span<const int64_t> popularity,
                       const TransitionCounts* transitions) {
  if (baseline == Baseline::kFomc && transitions == nullptr) {
    throw ConfigError("FOMC baseline needs transition counts");
  }
  // Two-level keys are packed as primary * (max_pop + 1) + popularity, exact
  // in double precision for any realistic log size.
  const int64_t max_pop =
      popularity.empty() ? 0 : *std::max_element(popularity.begin(), popularity.end());
  const double base = static_cast<double>(max_pop + 1);
  std::vector<int64_t> pop_copy(popularity.begin(), popularity.end());
  return [=, popularity = std::move(pop_copy)](size_t, std::span<const int32_t> history,
             std::span<const int32_t> candidates) {
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (int32_t c : candidates) {
      const double pop = static_cast<double>(popularity[c]);
      double primary = 0.0;
      if (baseline == Baseline::kSPop) {
        primary = static_cast<double>(
            std::count(history.begin(), history.end(), c));
      } else if (baseline == Baseline::kFomc && !history.empty()) {
        primary = static_cast<double>(transitions->Count(history.back(), c));
      }
      scores.push_back(primary * base + pop);
    }
    return scores;
  };
}

ScoreFn RerankedScorer(ScoreFn base, std::span<const int64_t> popularity,
                       size_t list_size) {
  std::vector<int64_t> pop_copy(popularity.begin(), popularity.end());
  return [=, base = std::move(base), popularity = std::move(pop_copy)](size_t u, std::span<const int32_t> history,
             std::span<const int32_t> candidates) {
    std::vector<double> s = base(u, history, candidates);
    std::vector<int32_t> pos(candidates.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(), [&](int32_t a, int32_t b) {
      if (s[a] != s[b]) return s[a] > s[b];
      return candidates[a] < candidates[b];
    });
    const size_t top = std::min(list_size, pos.size());
    std::stable_sort(pos.begin(), pos.begin() + top, [&](int32_t a, int32_t b) {
      return popularity[candidates[a]] < popularity[candidates[b]];
    });
    std::vector<double> out(candidates.size());
    for (size_t r = 0; r < pos.size(); ++r) {
      out[pos[r]] = -static_cast<double>(r);
    }
    return out;
  };
}

}  // namespace seqrec
