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

// Versioned JSON container for named tensors plus config and lineage. Doubles
// are written in shortest round-trip form, so a save/load cycle is exact.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seqrec/model.h"

namespace seqrec {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  // "model", "inference" or "train_state".
  std::string kind;
  std::string catalog_hash;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  const nn::Tensor& Get(const std::string& name) const;
  const nn::Tensor* Find(const std::string& name) const;
  // Hash over kind, catalog hash, config and raw tensor bytes (not meta).
  std::string ContentHash() const;
};

void SaveCheckpoint(const Checkpoint& checkpoint, const std::string& path);
// Throws IoError or FormatError.
Checkpoint LoadCheckpoint(const std::string& path);

nlohmann::json ModelConfigToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

Checkpoint ModelToCheckpoint(const SequenceModel& model,
                             const std::string& catalog_hash);
// Rebuilds the model. When expected_catalog_hash is non-empty it must match
// the checkpoint's, otherwise LineageError.
SequenceModel ModelFromCheckpoint(const Checkpoint& checkpoint,
                                  const std::string& expected_catalog_hash = "");

// Copies named tensors into parameters; every parameter must be present with
// a matching shape.
void LoadParameters(const Checkpoint& checkpoint,
                    const std::vector<nn::Parameter*>& params,
                    const std::string& prefix = "");
void StoreParameters(const std::vector<const nn::Parameter*>& params,
                     Checkpoint* checkpoint, const std::string& prefix = "");

}  // namespace seqrec
