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

#include "seqrec/pretrain.h"

#include <algorithm>
#include <cmath>

#include "seqrec/errors.h"

namespace seqrec {

using json = nlohmann::json;
using nn::ForwardContext;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

// Stream tags for DeriveSeed.
constexpr uint64_t kInitStream = 0x1417;
constexpr uint64_t kShuffleStream = 1;
constexpr uint64_t kMaskStream = 2;
constexpr uint64_t kDropoutStream = 3;

// GRU training chunks: up to max_len + 1 consecutive items, so every target
// is predicted once from at most max_len preceding items of its chunk.
std::vector<TrainingExample> MakeNextItemChunks(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len,
    size_t stride) {
  std::vector<TrainingExample> out;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    size_t end = seq.size();
    while (end >= 2) {
      const size_t begin = end > max_len + 1 ? end - max_len - 1 : 0;
      TrainingExample ex;
      ex.input.assign(seq.begin() + begin, seq.begin() + end - 1);
      for (size_t t = 0; t + 1 < end - begin; ++t) {
        ex.truth.emplace_back(t, seq[begin + t + 1]);
      }
      out.push_back(std::move(ex));
      if (begin == 0) break;
      end = end > stride ? end - stride : 0;
    }
  }
  return out;
}

}  // namespace

void PretrainConfig::Validate() const {
  model.Validate();
  if (!(mask_probability > 0.0 && mask_probability < 1.0)) {
    throw ParameterError("mask_probability must lie in (0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (adam.peak_lr < 0.0 || adam.l2 < 0.0 || adam.warmup_steps < 0) {
    throw ConfigError("learning rate, l2 and warmup must be non-negative");
  }
}

std::vector<std::vector<int32_t>> SlidingWindows(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len,
    size_t stride) {
  if (stride == 0) stride = max_len;
  std::vector<std::vector<int32_t>> out;
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    size_t end = seq.size();
    while (true) {
      const size_t begin = end > max_len ? end - max_len : 0;
      out.emplace_back(seq.begin() + begin, seq.begin() + end);
      if (begin == 0 || end <= stride) break;
      end -= stride;
    }
  }
  return out;
}

TrainingExample MaskWindow(std::span<const int32_t> window, double p,
                           Rng& rng) {
  TrainingExample ex;
  while (ex.truth.empty()) {
    ex.input.assign(window.begin(), window.end());
    for (size_t i = 0; i < window.size(); ++i) {
      if (rng.Bernoulli(p)) {
        ex.input[i] = nn::kMaskToken;
        ex.truth.emplace_back(i, window[i]);
      }
    }
  }
  return ex;
}

std::vector<TrainingExample> MakeMaskedExamples(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len,
    size_t stride, double p, Rng& rng) {
  std::vector<TrainingExample> out;
  for (const auto& w : SlidingWindows(sequences, max_len, stride)) {
    out.push_back(MaskWindow(w, p, rng));
  }
  return out;
}

std::vector<TrainingExample> MakeNextItemExamples(
    const std::vector<std::vector<int32_t>>& sequences, size_t max_len) {
  std::vector<TrainingExample> out;
  for (const auto& seq : sequences) {
    for (size_t t = 1; t < seq.size(); ++t) {
      const size_t begin = t > max_len ? t - max_len : 0;
      TrainingExample ex;
      ex.input.assign(seq.begin() + begin, seq.begin() + t);
      ex.truth.emplace_back(ex.input.size() - 1, seq[t]);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

double NllLoss(std::span<const double> scores, int32_t truth) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return std::log(z) + mx - scores[truth];
}

Var BatchLoss(Tape& tape, const SequenceModel& model,
              std::span<const TrainingExample> batch,
              const ForwardContext& ctx) {
  const ModelConfig& cfg = model.config();
  std::vector<Var> rows;
  std::vector<int32_t> targets;
  for (const TrainingExample& ex : batch) {
    const size_t n = ex.input.size();
    Var states;
    if (cfg.kind == EncoderKind::kTransformer) {
      Var e = EmbedTokens(tape, model.table(), ex.input,
                          cfg.frame_length() - n, ctx);
      states = TransformerHidden(tape, model.encoder(), e, ctx);
    } else {
      states = GruStates(tape, model.encoder(),
                         EmbedTokens(tape, model.table(), ex.input, 0, ctx));
    }
    for (const auto& [pos, item] : ex.truth) {
      rows.push_back(SliceRows(states, pos, 1));
      targets.push_back(item);
    }
  }
  if (targets.empty()) throw TrainingError("batch without targets");
  Var h = rows.size() == 1 ? rows[0] : nn::ConcatRows(rows);
  if (cfg.kind == EncoderKind::kTransformer) h = ProjectState(tape, model.encoder(), h);
  Var loss = nn::SoftmaxCrossEntropy(ScoreAll(tape, model.table(), h), targets);
  return Scale(loss, 1.0 / static_cast<double>(targets.size()));
}

PretrainResult Pretrain(const Dataset& dataset, const LeaveOneOutSplit& split,
                        const PretrainConfig& config,
                        std::optional<TrainState> resume,
                        const EpochCallback& on_epoch) {
  config.Validate();
  if (split.users.empty()) throw EmptyDatasetError("nothing to train on");
  if (config.model.num_items != dataset.catalog.size()) {
    throw ConfigError("model has " + std::to_string(config.model.num_items) +
                      " items but the catalog has " +
                      std::to_string(dataset.catalog.size()));
  }
  TrainState state;
  if (resume) {
    state = std::move(*resume);
  } else {
    state.model =
        SequenceModel::Create(config.model, DeriveSeed(config.seed, kInitStream));
  }
  nn::Adam adam(config.adam, state.model.Parameters());
  if (resume) adam.set_state(state.adam);

  const auto sequences = TrainSequences(split);
  const size_t stride =
      config.window_stride ? config.window_stride : config.model.max_len;
  const bool transformer = config.model.kind == EncoderKind::kTransformer;
  const auto windows = SlidingWindows(sequences, config.model.max_len, stride);
  std::vector<TrainingExample> gru_examples;
  if (!transformer) {
    gru_examples = MakeNextItemChunks(sequences, config.model.max_len, stride);
  }
  const PopularityPartition partition =
      PartitionHeadTail(dataset.train_popularity, 0.5);

  for (size_t epoch = state.epochs_done; epoch < config.epochs; ++epoch) {
    std::vector<TrainingExample> examples;
    if (transformer) {
      Rng mask_rng(DeriveSeed(config.seed, epoch, kMaskStream));
      for (const auto& w : windows) {
        examples.push_back(MaskWindow(w, config.mask_probability, mask_rng));
      }
    } else {
      examples = gru_examples;
    }
    Rng shuffle_rng(DeriveSeed(config.seed, epoch, kShuffleStream));
    shuffle_rng.Shuffle(examples);
    Rng dropout_rng(DeriveSeed(config.seed, epoch, kDropoutStream));
    const ForwardContext ctx{true, config.model.dropout, &dropout_rng};

    double loss_sum = 0.0;
    size_t batches = 0;
    for (size_t b = 0; b < examples.size(); b += config.batch_size) {
      const size_t e = std::min(examples.size(), b + config.batch_size);
      Tape tape;
      Var loss = BatchLoss(
          tape, state.model,
          std::span<const TrainingExample>(examples.data() + b, e - b), ctx);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite training loss at epoch " +
                            std::to_string(epoch) + ", step " +
                            std::to_string(adam.state().step));
      }
      tape.Backward(loss);
      nn::GradientBuffer grads;
      tape.AccumulateInto(grads);
      try {
        adam.Step(grads);
      } catch (const NumericError& err) {
        throw TrainingError(std::string(err.what()) + " (epoch " +
                            std::to_string(epoch) + ")");
      }
      loss_sum += value;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / batches : 0.0;
    if (config.validate) {
      log.validation = Evaluate(ModelScorer(state.model), dataset, split,
                                partition, config.validation)
                           .all;
    }
    state.epochs_done = epoch + 1;
    state.adam = adam.state();
    state.log.push_back(log);
    if (!config.validate || log.validation.mrr > state.best_mrr) {
      state.best = state.model;
      state.best_mrr = config.validate ? log.validation.mrr : 0.0;
      state.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(log);
  }
  state.adam = adam.state();

  PretrainResult result;
  result.model = state.best ? *state.best : state.model;
  result.state = std::move(state);
  return result;
}

Checkpoint TrainStateToCheckpoint(const TrainState& state,
                                  const std::string& catalog_hash) {
  Checkpoint c;
  c.kind = "train_state";
  c.catalog_hash = catalog_hash;
  c.config = ModelConfigToJson(state.model.config());
  StoreParameters(state.model.Parameters(), &c, "model/");
  if (state.best) StoreParameters(state.best->Parameters(), &c, "best/");
  std::vector<const nn::Parameter*> params;
  for (const nn::Parameter* p : state.model.Parameters()) {
    if (!p->frozen) params.push_back(p);
  }
  if (state.adam.first_moment.size() == params.size()) {
    for (size_t i = 0; i < params.size(); ++i) {
      c.tensors.emplace_back("adam_m/" + params[i]->name,
                             state.adam.first_moment[i]);
      c.tensors.emplace_back("adam_v/" + params[i]->name,
                             state.adam.second_moment[i]);
    }
  }
  json log = json::array();
  for (const EpochLog& e : state.log) {
    log.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_hr5", e.validation.hr5},
                   {"val_hr10", e.validation.hr10},
                   {"val_mrr", e.validation.mrr},
                   {"val_support", e.validation.support}});
  }
  c.meta = {{"epochs_done", state.epochs_done},
            {"adam_step", state.adam.step},
            {"has_best", state.best.has_value()},
            {"best_mrr", state.best_mrr},
            {"best_epoch", state.best_epoch},
            {"log", log}};
  return c;
}

TrainState TrainStateFromCheckpoint(const Checkpoint& c) {
  if (c.kind != "train_state") {
    throw FormatError("expected a train_state checkpoint, got " + c.kind);
  }
  TrainState s;
  const ModelConfig cfg = ModelConfigFromJson(c.config);
  s.model = SequenceModel::Create(cfg, 0);
  LoadParameters(c, s.model.Parameters(), "model/");
  try {
    if (c.meta.at("has_best").get<bool>()) {
      s.best = SequenceModel::Create(cfg, 0);
      LoadParameters(c, s.best->Parameters(), "best/");
    }
    s.epochs_done = c.meta.at("epochs_done").get<size_t>();
    s.adam.step = c.meta.at("adam_step").get<int64_t>();
    s.best_mrr = c.meta.at("best_mrr").get<double>();
    s.best_epoch = c.meta.at("best_epoch").get<size_t>();
    for (const auto& e : c.meta.at("log")) {
      EpochLog log;
      log.epoch = e.at("epoch").get<size_t>();
      log.train_loss = e.at("train_loss").get<double>();
      log.validation.hr5 = e.at("val_hr5").get<double>();
      log.validation.hr10 = e.at("val_hr10").get<double>();
      log.validation.mrr = e.at("val_mrr").get<double>();
      log.validation.support = e.at("val_support").get<size_t>();
      s.log.push_back(log);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed train state: ") + e.what());
  }
  for (const nn::Parameter* p : s.model.Parameters()) {
    if (p->frozen) continue;
    s.adam.first_moment.push_back(c.Get("adam_m/" + p->name));
    s.adam.second_moment.push_back(c.Get("adam_v/" + p->name));
  }
  return s;
}

}  // namespace seqrec
