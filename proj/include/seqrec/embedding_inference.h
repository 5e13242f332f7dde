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

// Context-based embedding inference for rare and unseen items.
//
// An interpreter (a copy of the trained sequence encoder) turns each context
// window of an item into a vector; an aggregator (self-attention over the set
// of window vectors, mean pooling, affine map) turns a set of those into an
// item embedding. The pair is fit on frequent items to reproduce their
// trained lookup rows from a few sampled contexts, then used to replace the
// rows of infrequent items or to add rows for new ones. The recommender
// itself is never retrained.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seqrec/adam.h"
#include "seqrec/checkpoint.h"
#include "seqrec/dataset.h"
#include "seqrec/model.h"

namespace seqrec {

enum class TargetSet { kHead, kAll };
enum class InterpreterInit { kPretrained, kScratch };

std::string TargetSetName(TargetSet t);
TargetSet ParseTargetSet(const std::string& name);
std::string InterpreterInitName(InterpreterInit i);
InterpreterInit ParseInterpreterInit(const std::string& name);

struct WindowSizes {
  size_t left = 0;
  size_t right = 0;
};

// Transformer: floor((max_len - 2) / 2) on each side of a masked center.
// GRU: max_len - 1 items of left context only.
WindowSizes ContextWindowSizes(const ModelConfig& model);

struct FewShotConfig {
  // Contexts per target per step are drawn uniformly from 1..kappa_max.
  size_t kappa_max = 10;
  // false: every step uses all contexts of the target (up to context_cap).
  bool few_shot = true;
  // Most windows aggregated for one item; beyond it a uniform subsample.
  size_t context_cap = 64;
  TargetSet target_set = TargetSet::kHead;
  InterpreterInit interpreter_init = InterpreterInit::kPretrained;
  bool interpreter_frozen = true;
  size_t aggregator_blocks = 2;
  size_t aggregator_heads = 4;
  double dropout = 0.0;
  nn::AdamConfig adam{.peak_lr = 1e-3, .warmup_steps = 0, .l2 = 0.0};
  size_t epochs = 50;
  size_t batch_size = 16;
  uint64_t seed = 0;

  void Validate() const;
};

// Parameters of the inference function.
struct InferenceFunction {
  EncoderKind kind = EncoderKind::kTransformer;
  size_t max_len = 0;
  EncoderParams interpreter;
  std::vector<nn::TransformerBlock> aggregator;
  nn::Linear output;

  // Interpreter from `model` (bitwise copy or fresh init), new aggregator.
  static InferenceFunction Create(const SequenceModel& model,
                                  const FewShotConfig& config);
  std::vector<nn::Parameter*> Parameters();
  std::vector<const nn::Parameter*> Parameters() const;
  std::vector<nn::Parameter*> InterpreterParameters();
  std::vector<nn::Parameter*> AggregatorParameters();
};

// True when the window gives the interpreter anything to read.
bool HasContext(const ContextWindow& window, EncoderKind kind);

// Context windows usable by `kind`, in their original order.
std::vector<ContextWindow> UsableWindows(std::span<const ContextWindow> windows,
                                         EncoderKind kind);

// Interpreter output for one window, [1 x d]. Transformer: left, [mask],
// right placed at the end of the frame; the final hidden row at [mask].
// GRU: left context only; the last hidden state. Throws ContextError when the
// window has no context.
nn::Var InterpretWindow(nn::Tape& tape, const EmbeddingTable& table,
                        const InferenceFunction& phi,
                        const ContextWindow& window,
                        const nn::ForwardContext& ctx);

// Aggregator over a set of window vectors [k x d] -> [1 x d]. No positions.
nn::Var Aggregate(nn::Tape& tape, const InferenceFunction& phi, nn::Var reprs,
                  const nn::ForwardContext& ctx);

// Full function over a window set, forward only.
std::vector<double> InferFromWindows(const SequenceModel& model,
                                     const InferenceFunction& phi,
                                     std::span<const ContextWindow> windows);

// Up to `cap` windows, uniformly subsampled when there are more. The result
// keeps the original order.
std::vector<ContextWindow> CapWindows(std::span<const ContextWindow> windows,
                                      size_t cap, uint64_t seed);

struct InferenceEpochLog {
  size_t epoch = 0;
  double train_loss = 0.0;
  // Mean squared distance over all targets, each inferred from a sample of
  // up to kappa_max contexts that is fixed for the whole run.
  double distance = 0.0;
};

struct InferenceTrainResult {
  InferenceFunction phi;
  std::vector<InferenceEpochLog> log;
  std::vector<int32_t> targets;
  // Targets dropped for lack of usable contexts.
  std::vector<int32_t> skipped;
};

using InferenceEpochCallback = std::function<void(const InferenceEpochLog&)>;

// Fits `phi` so that aggregated contexts of each target reproduce the
// target's lookup row. Throws TrainingError when no target has a context.
InferenceTrainResult TrainInferenceFunction(
    const SequenceModel& model, InferenceFunction phi,
    const std::map<int32_t, ContextSet>& contexts,
    std::span<const int32_t> targets, const FewShotConfig& config,
    const InferenceEpochCallback& on_epoch = nullptr);

// Targets selected by config.target_set.
std::vector<int32_t> TrainingTargets(const PopularityPartition& partition,
                                     TargetSet target_set);

// Windows for every catalog item, drawn from `sequences` with the window
// sizes of `model`.
std::map<int32_t, ContextSet> ItemContexts(
    const std::vector<std::vector<int32_t>>& sequences, size_t num_items,
    const ModelConfig& model);

enum class Provenance { kOriginal, kInferred };

struct InferredEmbedding {
  int32_t item = -1;
  std::vector<double> vector;
  Provenance provenance = Provenance::kOriginal;
};

// One entry per catalog item: head items and contextless tail items keep
// their rows, other tail items get the inferred vector.
std::vector<InferredEmbedding> InferEmbeddings(
    const SequenceModel& model, const InferenceFunction& phi,
    const std::map<int32_t, ContextSet>& contexts,
    const PopularityPartition& partition, const FewShotConfig& config);

// Copy of `model` with inferred rows written into the item table. Throws
// DimensionError on a vector of the wrong size, IndexError on a bad item.
SequenceModel ApplyEmbeddings(const SequenceModel& model,
                              std::span<const InferredEmbedding> inferred);

// Appends a row (bias 0) for an unseen item inferred from `windows` and
// returns its index. Context tokens must be known items; the window targets
// are ignored. Throws ContextError without a usable window.
int32_t InferNewItem(SequenceModel* model, const InferenceFunction& phi,
                     std::span<const ContextWindow> windows, size_t cap,
                     uint64_t seed);

// Mean cosine similarity between inferred and lookup rows of `items`, using
// all (capped) contexts. Items without contexts are ignored.
double MeanReproductionCosine(const SequenceModel& model,
                              const InferenceFunction& phi,
                              const std::map<int32_t, ContextSet>& contexts,
                              std::span<const int32_t> items, size_t cap,
                              uint64_t seed);

// Mean squared distance between inferred and lookup rows of `items` when
// each is inferred from `kappa` sampled contexts.
double MeanReproductionError(const SequenceModel& model,
                             const InferenceFunction& phi,
                             const std::map<int32_t, ContextSet>& contexts,
                             std::span<const int32_t> items, size_t kappa,
                             uint64_t seed);

// Mean Euclidean distance from each tail row to its nearest head row.
double MeanNearestHeadDistance(const nn::Tensor& items,
                               const PopularityPartition& partition);

nlohmann::json FewShotConfigToJson(const FewShotConfig& config);
// Missing keys keep their defaults; unknown keys are a ConfigError.
FewShotConfig FewShotConfigFromJson(const nlohmann::json& j);

Checkpoint InferenceFunctionToCheckpoint(const InferenceFunction& phi,
                                         const FewShotConfig& config,
                                         const std::string& catalog_hash,
                                         const std::string& source_model_hash);
// Rebuilds phi; the structure comes from the stored config.
InferenceFunction InferenceFunctionFromCheckpoint(const Checkpoint& c);

}  // namespace seqrec
