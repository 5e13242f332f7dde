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

// Long-tailed synthetic interaction logs with planted first-order dynamics.
//
// Item r (0-based popularity rank) has base weight (r + 1)^-s. Items are dealt
// round-robin by rank into clusters. Each user starts from a base-weight draw;
// every following item stays in the current item's cluster with probability
// `stay` (drawn by base weight within the cluster) and otherwise comes from
// a global base-weight draw.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqrec/dataset.h"

namespace seqrec {

struct SyntheticConfig {
  size_t users = 2000;
  size_t items = 500;
  double zipf_exponent = 1.2;
  size_t clusters = 20;
  double stay = 0.8;
  size_t min_length = 5;
  size_t max_length = 20;
  uint64_t seed = 0;
};

// Item ids are "i<rank>", user ids "u<n>", timestamps strictly increase
// within a user.
std::vector<Interaction> GenerateSynthetic(const SyntheticConfig& config);

// Cluster of the item with id "i<rank>".
size_t SyntheticCluster(const SyntheticConfig& config, size_t rank);

void WriteCsv(const std::vector<Interaction>& rows, const std::string& path);

}  // namespace seqrec
