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

// New-item protocol. A sample of items is erased from the log; the model and
// the inference function only ever see the remaining (extant) world. The
// erased items are then added one by one from their training contexts and
// evaluated on the users whose held-out item is new.

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "seqrec/dataset.h"
#include "seqrec/eval.h"
#include "seqrec/model.h"

namespace seqrec {

struct NewItemSplit {
  // Original indices of the erased items, ascending.
  std::vector<int32_t> new_items;
  // Original index -> index in the reindexed catalog (extant first, then
  // new items in ascending original order), and back.
  std::vector<int32_t> to_remapped;
  std::vector<int32_t> to_original;
  size_t num_extant = 0;

  // Log without the new items; users left with fewer than 3 items are
  // dropped. Split and train popularity are filled in.
  Dataset extant;
  LeaveOneOutSplit extant_split;

  // The whole log in the reindexed catalog, same users and split as the
  // input.
  Dataset remapped;
  LeaveOneOutSplit remapped_split;

  bool IsNew(int32_t remapped_item) const {
    return static_cast<size_t>(remapped_item) >= num_extant;
  }
};

// Draws round(fraction * items) new items, uniformly among items that are
// the test item of some user and occur in some train portion. Throws
// ParameterError unless 0 < fraction < 1 and at least one item qualifies.
NewItemSplit SplitNewItems(const Dataset& dataset,
                           const LeaveOneOutSplit& split, double fraction,
                           uint64_t seed);

// Windows around each new item (remapped index) in the train portions, with
// every other new item removed from the sequences first. Repeats of the item
// itself are dropped from its windows, which therefore hold extant items only.
std::map<int32_t, ContextSet> NewItemContexts(const NewItemSplit& s,
                                              const ModelConfig& model);

struct NoveltyReport {
  MetricsReport extant;
  MetricsReport fresh;
};

// Test-time evaluation over the reindexed catalog, grouped by whether the
// user's test item is new. Head and tail come from `partition` (reindexed).
NoveltyReport EvaluateByNovelty(const SequenceModel& model,
                                const NewItemSplit& s,
                                const PopularityPartition& partition,
                                const EvalConfig& config);

}  // namespace seqrec
