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

// End-to-end training of the sequential recommender. The transformer learns
// to recover randomly masked items; the GRU learns to predict each next item
// from its prefix. Both minimize full-softmax negative log-likelihood.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "seqrec/adam.h"
#include "seqrec/checkpoint.h"
#include "seqrec/dataset.h"
#include "seqrec/eval.h"
#include "seqrec/model.h"

namespace seqrec {

struct PretrainConfig {
  ModelConfig model;
  double mask_probability = 0.2;
  nn::AdamConfig adam{.peak_lr = 1e-3, .warmup_steps = 100, .l2 = 1e-4};
  size_t epochs = 20;
  size_t batch_size = 128;
  // Histories longer than the window are cut into windows this far apart;
  // 0 means max_len (non-overlapping).
  size_t window_stride = 0;
  uint64_t seed = 0;
  // Validation ranking after each epoch; the best epoch by MRR is kept.
  EvalConfig validation{.n_negatives = 100, .seed = 0, .validation = true};
  bool validate = true;

  void Validate() const;
};

// Input tokens (items or kMaskToken) with the positions that carry a loss.
struct TrainingExample {
  std::vector<int32_t> input;
  std::vector<std::pair<size_t, int32_t>> truth;
};

// Right-aligned windows of at most max_len items cut from the end of each
// sequence, one every `stride` items.
std::vector<std::vector<int32_t>> SlidingWindows(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len,
    size_t stride);

// Each position is replaced by kMaskToken independently with probability p;
// windows with no masked position are redrawn.
TrainingExample MaskWindow(std::span<const int32_t> window, double p, Rng& rng);
std::vector<TrainingExample> MakeMaskedExamples(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len,
    size_t stride, double p, Rng& rng);

// One example per position t >= 1: the last max_len items before t predict
// the item at t.
std::vector<TrainingExample> MakeNextItemExamples(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len);

// -log softmax(scores)[truth].
double NllLoss(std::span<const double> scores, int32_t truth);

struct EpochLog {
  size_t epoch = 0;
  double train_loss = 0.0;
  GroupMetrics validation;
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  size_t epochs_done = 0;
  SequenceModel model;
  nn::AdamState adam;
  std::optional<SequenceModel> best;
  double best_mrr = -1.0;
  size_t best_epoch = 0;
  std::vector<EpochLog> log;
};

struct PretrainResult {
  // Best validation epoch (or the last one without validation).
  SequenceModel model;
  TrainState state;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Runs epochs [resume.epochs_done, config.epochs). Per-epoch randomness is
// derived from (seed, epoch), so a resumed run retraces an uninterrupted one.
// Throws TrainingError on a non-finite loss or gradient.
PretrainResult Pretrain(const Dataset& dataset, const LeaveOneOutSplit& split,
                        const PretrainConfig& config,
                        std::optional<TrainState> resume = std::nullopt,
                        const EpochCallback& on_epoch = nullptr);

// Mean loss over one batch of examples, recorded on `tape`.
nn::Var BatchLoss(nn::Tape& tape, const SequenceModel& model,
                  std::span<const TrainingExample> batch,
                  const nn::ForwardContext& ctx);

Checkpoint TrainStateToCheckpoint(const TrainState& state,
                                  const std::string& catalog_hash);
TrainState TrainStateFromCheckpoint(const Checkpoint& checkpoint);

}  // namespace seqrec
