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

#include "seqrec/new_items.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqrec/embedding_inference.h"
#include "seqrec/errors.h"
#include "seqrec/rng.h"

namespace seqrec {

NewItemSplit SplitNewItems(const Dataset& dataset,
                           const LeaveOneOutSplit& split, double fraction,
                           uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ParameterError("new-item fraction must lie in (0, 1), got " +
                         std::to_string(fraction));
  }
  const size_t n = dataset.catalog.size();
  std::vector<bool> is_test(n, false);
  for (const auto& u : split.users) is_test[u.test] = true;
  const std::vector<int64_t> train_pop =
      CountPopularity(TrainSequences(split), n);
  std::vector<int32_t> eligible;
  for (size_t i = 0; i < n; ++i) {
    if (is_test[i] && train_pop[i] > 0) eligible.push_back(static_cast<int32_t>(i));
  }
  if (eligible.empty()) throw ParameterError("no item qualifies as new");
  const size_t want = std::clamp<size_t>(
      static_cast<size_t>(std::llround(fraction * static_cast<double>(n))), 1,
      eligible.size());

  NewItemSplit s;
  Rng rng(seed);
  for (size_t k : rng.SampleWithoutReplacement(eligible.size(), want)) {
    s.new_items.push_back(eligible[k]);
  }
  std::sort(s.new_items.begin(), s.new_items.end());

  std::vector<bool> is_new(n, false);
  for (int32_t i : s.new_items) is_new[i] = true;
  s.to_remapped.assign(n, -1);
  for (size_t i = 0; i < n; ++i) {
    if (!is_new[i]) {
      s.to_remapped[i] = static_cast<int32_t>(s.to_original.size());
      s.to_original.push_back(static_cast<int32_t>(i));
    }
  }
  s.num_extant = s.to_original.size();
  for (int32_t i : s.new_items) {
    s.to_remapped[i] = static_cast<int32_t>(s.to_original.size());
    s.to_original.push_back(i);
  }

  for (int32_t orig : s.to_original) {
    s.remapped.catalog.Add(dataset.catalog.ItemOf(orig));
  }
  for (size_t e = 0; e < s.num_extant; ++e) {
    s.extant.catalog.Add(dataset.catalog.ItemOf(s.to_original[e]));
  }
  for (const auto& seq : dataset.sequences) {
    UserSequence full{seq.user, {}};
    UserSequence kept{seq.user, {}};
    for (int32_t i : seq.items) {
      full.items.push_back(s.to_remapped[i]);
      if (!is_new[i]) kept.items.push_back(s.to_remapped[i]);
    }
    s.remapped.sequences.push_back(std::move(full));
    if (kept.items.size() >= 3) s.extant.sequences.push_back(std::move(kept));
  }
  if (s.extant.sequences.empty()) {
    throw EmptyDatasetError("no user keeps 3 extant items");
  }
  s.remapped_split = SplitLeaveOneOut(&s.remapped);
  s.extant_split = SplitLeaveOneOut(&s.extant);
  return s;
}

std::map<int32_t, ContextSet> NewItemContexts(const NewItemSplit& s,
                                              const ModelConfig& model) {
  const WindowSizes w = ContextWindowSizes(model);
  const auto train = TrainSequences(s.remapped_split);
  std::map<int32_t, ContextSet> out;
  for (int32_t orig : s.new_items) {
    const int32_t item = s.to_remapped[orig];
    std::vector<std::vector<int32_t>> filtered;
    filtered.reserve(train.size());
    for (const auto& seq : train) {
      std::vector<int32_t> f;
      for (int32_t i : seq) {
        if (!s.IsNew(i) || i == item) f.push_back(i);
      }
      filtered.push_back(std::move(f));
    }
    const int32_t one[] = {item};
    ContextSet set = ExtractContextSets(filtered, one, w.left, w.right).at(item);
    for (ContextWindow& win : set.windows) {
      std::erase(win.left, item);
      std::erase(win.right, item);
    }
    out[item] = std::move(set);
  }
  return out;
}

NoveltyReport EvaluateByNovelty(const SequenceModel& model,
                                const NewItemSplit& s,
                                const PopularityPartition& partition,
                                const EvalConfig& config) {
  std::vector<UserOutcome> outcomes;
  Evaluate(ModelScorer(model), s.remapped, s.remapped_split, partition, config,
           &outcomes);
  MetricsAccumulator extant, fresh;
  for (const UserOutcome& o : outcomes) {
    const std::vector<int32_t> history = s.remapped_split.TestHistory(o.user);
    const bool has_tail =
        std::any_of(history.begin(), history.end(),
                    [&](int32_t i) { return partition.IsTail(i); });
    (s.IsNew(o.truth) ? fresh : extant)
        .Add(o.rank, partition.IsTail(o.truth), has_tail);
  }
  return {extant.Finish(), fresh.Finish()};
}

}  // namespace seqrec
