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

#include "seqrec/embedding_inference.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "seqrec/errors.h"

namespace seqrec {

using json = nlohmann::json;
using nn::ForwardContext;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr uint64_t kPhiInitStream = 0x5a11;
constexpr uint64_t kTrainStream = 1;
constexpr uint64_t kDropoutStream = 2;
constexpr uint64_t kEvalSampleStream = 3;
constexpr uint64_t kCapStream = 4;
constexpr uint64_t kErrorStream = 5;

Tensor SelectRows(const Tensor& t, std::span<const size_t> rows) {
  Tensor out = Tensor::Matrix(rows.size(), t.cols());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy(t.row(rows[i]).begin(), t.row(rows[i]).end(),
              out.row(i).begin());
  }
  return out;
}

std::vector<size_t> SortedSample(Rng& rng, size_t n, size_t k) {
  std::vector<size_t> idx = rng.SampleWithoutReplacement(n, k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Tensor RowTensor(std::span<const double> row) {
  return Tensor({1, row.size()}, std::vector<double>(row.begin(), row.end()));
}

// Forward-only interpretation of every window, [k x d].
Tensor InterpretAll(const EmbeddingTable& table, const InferenceFunction& phi,
                    std::span<const ContextWindow> windows) {
  Tensor out = Tensor::Matrix(windows.size(), table.dim());
  const ForwardContext ctx;
  for (size_t i = 0; i < windows.size(); ++i) {
    Tape tape(false);
    const Tensor& r = InterpretWindow(tape, table, phi, windows[i], ctx).value();
    std::copy(r.values().begin(), r.values().end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> AggregateRows(const InferenceFunction& phi,
                                  const Tensor& reprs) {
  Tape tape(false);
  const Tensor& v = Aggregate(tape, phi, tape.Constant(reprs), {}).value();
  return {v.values().begin(), v.values().end()};
}

double SquaredDistanceOf(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

const std::vector<ContextWindow>* WindowsOf(
    const std::map<int32_t, ContextSet>& contexts, int32_t item) {
  auto it = contexts.find(item);
  return it == contexts.end() ? nullptr : &it->second.windows;
}

}  // namespace

std::string TargetSetName(TargetSet t) {
  return t == TargetSet::kHead ? "head" : "all";
}

TargetSet ParseTargetSet(const std::string& name) {
  if (name == "head") return TargetSet::kHead;
  if (name == "all") return TargetSet::kAll;
  throw ConfigError("target_set must be 'head' or 'all', got '" + name + "'");
}

std::string InterpreterInitName(InterpreterInit i) {
  return i == InterpreterInit::kPretrained ? "pretrained" : "scratch";
}

InterpreterInit ParseInterpreterInit(const std::string& name) {
  if (name == "pretrained") return InterpreterInit::kPretrained;
  if (name == "scratch") return InterpreterInit::kScratch;
  throw ConfigError("interpreter init must be 'pretrained' or 'scratch', got '" +
                    name + "'");
}

WindowSizes ContextWindowSizes(const ModelConfig& model) {
  if (model.kind == EncoderKind::kTransformer) {
    const size_t side = (model.max_len - 2) / 2;
    return {side, side};
  }
  return {model.max_len - 1, 0};
}

void FewShotConfig::Validate() const {
  if (kappa_max < 1) throw ParameterError("kappa_max must be at least 1");
  if (context_cap < 1) throw ParameterError("context_cap must be at least 1");
  if (aggregator_blocks < 1) {
    throw ParameterError("the aggregator needs at least one block");
  }
  if (aggregator_heads < 1) throw ParameterError("aggregator_heads must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ParameterError("dropout must lie in [0, 1)");
  }
  if (adam.peak_lr < 0.0 || adam.l2 < 0.0 || adam.warmup_steps < 0) {
    throw ConfigError("learning rate, l2 and warmup must be non-negative");
  }
}

InferenceFunction InferenceFunction::Create(const SequenceModel& model,
                                            const FewShotConfig& config) {
  config.Validate();
  const ModelConfig& mc = model.config();
  Rng rng(DeriveSeed(config.seed, kPhiInitStream));
  InferenceFunction phi;
  phi.kind = mc.kind;
  phi.max_len = mc.max_len;
  phi.interpreter = config.interpreter_init == InterpreterInit::kPretrained
                        ? model.encoder()
                        : EncoderParams::Create(mc, rng);
  phi.interpreter.SetFrozen(config.interpreter_frozen);
  const nn::InitSpec init{mc.init_std};
  for (size_t b = 0; b < config.aggregator_blocks; ++b) {
    phi.aggregator.push_back(nn::TransformerBlock::Create(
        "aggregator.block" + std::to_string(b), mc.dim, config.aggregator_heads,
        init, rng));
  }
  phi.output = nn::Linear::Create("aggregator.output", mc.dim, mc.dim, init, rng);
  return phi;
}

std::vector<Parameter*> InferenceFunction::InterpreterParameters() {
  std::vector<Parameter*> out;
  interpreter.Collect(out);
  return out;
}

std::vector<Parameter*> InferenceFunction::AggregatorParameters() {
  std::vector<Parameter*> out;
  for (auto& b : aggregator) b.Collect(out);
  output.Collect(out);
  return out;
}

std::vector<Parameter*> InferenceFunction::Parameters() {
  std::vector<Parameter*> out = InterpreterParameters();
  for (Parameter* p : AggregatorParameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> InferenceFunction::Parameters() const {
  auto params = const_cast<InferenceFunction*>(this)->Parameters();
  return {params.begin(), params.end()};
}

bool HasContext(const ContextWindow& window, EncoderKind kind) {
  return kind == EncoderKind::kGru
             ? !window.left.empty()
             : !window.left.empty() || !window.right.empty();
}

std::vector<ContextWindow> UsableWindows(std::span<const ContextWindow> windows,
                                         EncoderKind kind) {
  std::vector<ContextWindow> out;
  for (const ContextWindow& w : windows) {
    if (HasContext(w, kind)) out.push_back(w);
  }
  return out;
}

Var InterpretWindow(Tape& tape, const EmbeddingTable& table,
                    const InferenceFunction& phi, const ContextWindow& window,
                    const ForwardContext& ctx) {
  if (!HasContext(window, phi.kind)) {
    throw ContextError("context window of item " +
                       std::to_string(window.target) + " is empty");
  }
  if (phi.kind == EncoderKind::kGru) {
    const size_t keep = std::min(window.left.size(), phi.max_len);
    std::span<const int32_t> tokens(window.left.data() + window.left.size() - keep,
                                    keep);
    Var states = GruStates(tape, phi.interpreter,
                           EmbedTokens(tape, table, tokens, 0, ctx));
    return nn::SliceRows(states, keep - 1, 1);
  }
  // Center plus as much context as the frame holds.
  const size_t frame = phi.max_len + 1;
  const size_t right = std::min(window.right.size(), frame - 1);
  const size_t left = std::min(window.left.size(), frame - 1 - right);
  std::vector<int32_t> tokens(window.left.end() - left, window.left.end());
  tokens.push_back(nn::kMaskToken);
  tokens.insert(tokens.end(), window.right.begin(),
                window.right.begin() + right);
  Var e = EmbedTokens(tape, table, tokens, frame - tokens.size(), ctx);
  Var h = TransformerHidden(tape, phi.interpreter, e, ctx);
  return nn::SliceRows(h, left, 1);
}

Var Aggregate(Tape& tape, const InferenceFunction& phi, Var reprs,
              const ForwardContext& ctx) {
  if (reprs.value().rows() == 0) throw ContextError("no contexts to aggregate");
  Var h = reprs;
  for (const auto& block : phi.aggregator) h = block.Forward(tape, h, {}, ctx);
  return phi.output.Forward(tape, nn::MeanRows(h));
}

std::vector<double> InferFromWindows(const SequenceModel& model,
                                     const InferenceFunction& phi,
                                     std::span<const ContextWindow> windows) {
  const std::vector<ContextWindow> usable = UsableWindows(windows, phi.kind);
  if (usable.empty()) throw ContextError("no usable context window");
  return AggregateRows(phi, InterpretAll(model.table(), phi, usable));
}

std::vector<ContextWindow> CapWindows(std::span<const ContextWindow> windows,
                                      size_t cap, uint64_t seed) {
  if (windows.size() <= cap) return {windows.begin(), windows.end()};
  Rng rng(seed);
  std::vector<ContextWindow> out;
  for (size_t i : SortedSample(rng, windows.size(), cap)) {
    out.push_back(windows[i]);
  }
  return out;
}

std::vector<int32_t> TrainingTargets(const PopularityPartition& partition,
                                     TargetSet target_set) {
  if (target_set == TargetSet::kHead) return partition.head;
  std::vector<int32_t> all(partition.is_tail.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

std::map<int32_t, ContextSet> ItemContexts(
    const std::vector<std::vector<int32_t>>& sequences, size_t num_items,
    const ModelConfig& model) {
  std::vector<int32_t> items(num_items);
  std::iota(items.begin(), items.end(), 0);
  const WindowSizes w = ContextWindowSizes(model);
  return ExtractContextSets(sequences, items, w.left, w.right);
}

InferenceTrainResult TrainInferenceFunction(
    const SequenceModel& model, InferenceFunction phi,
    const std::map<int32_t, ContextSet>& contexts,
    std::span<const int32_t> targets, const FewShotConfig& config,
    const InferenceEpochCallback& on_epoch) {
  config.Validate();
  const EmbeddingTable& table = model.table();
  const bool frozen = config.interpreter_frozen;

  struct Target {
    int32_t item;
    std::vector<ContextWindow> windows;
    Tensor cached;  // interpreter outputs when frozen
    std::vector<size_t> eval_sample;
  };
  InferenceTrainResult result;
  std::vector<Target> fit;
  for (int32_t item : targets) {
    if (item < 0 || static_cast<size_t>(item) >= table.num_items()) {
      throw IndexError("target item " + std::to_string(item) +
                       " outside the catalog");
    }
    const auto* windows = WindowsOf(contexts, item);
    std::vector<ContextWindow> usable =
        windows ? UsableWindows(*windows, phi.kind)
                : std::vector<ContextWindow>{};
    if (usable.empty()) {
      result.skipped.push_back(item);
      continue;
    }
    Target t{item, std::move(usable), {}, {}};
    Rng sample_rng(DeriveSeed(config.seed, kEvalSampleStream,
                              static_cast<uint64_t>(item)));
    t.eval_sample = SortedSample(sample_rng, t.windows.size(),
                                 std::min(t.windows.size(), config.kappa_max));
    if (frozen) t.cached = InterpretAll(table, phi, t.windows);
    result.targets.push_back(item);
    fit.push_back(std::move(t));
  }
  if (fit.empty()) {
    throw TrainingError("no training target has a usable context");
  }

  // Reprs of the chosen windows of one target.
  auto reprs_of = [&](Tape& tape, const Target& t,
                      std::span<const size_t> idx,
                      const ForwardContext& ctx) -> Var {
    if (frozen) return tape.Constant(SelectRows(t.cached, idx));
    std::vector<Var> rows;
    for (size_t i : idx) {
      rows.push_back(InterpretWindow(tape, table, phi, t.windows[i], ctx));
    }
    return rows.size() == 1 ? rows[0] : nn::ConcatRows(rows);
  };

  nn::Adam adam(config.adam, phi.Parameters());
  std::vector<size_t> order(fit.size());
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(DeriveSeed(config.seed, epoch, kTrainStream));
    Rng drop_rng(DeriveSeed(config.seed, epoch, kDropoutStream));
    const ForwardContext ctx{config.dropout > 0.0, config.dropout, &drop_rng};
    std::iota(order.begin(), order.end(), size_t{0});
    rng.Shuffle(order);

    double loss_sum = 0.0;
    for (size_t b = 0; b < order.size(); b += config.batch_size) {
      const size_t e = std::min(order.size(), b + config.batch_size);
      Tape tape;
      Var total;
      for (size_t k = b; k < e; ++k) {
        const Target& t = fit[order[k]];
        const size_t n = t.windows.size();
        std::vector<size_t> idx;
        if (config.few_shot) {
          const size_t kappa = static_cast<size_t>(rng.UniformRange(
              1, static_cast<int64_t>(std::min(n, config.kappa_max))));
          idx = SortedSample(rng, n, kappa);
        } else {
          idx = SortedSample(rng, n, std::min(n, config.context_cap));
        }
        Var out = Aggregate(tape, phi, reprs_of(tape, t, idx, ctx), ctx);
        Var d = nn::SquaredDistance(
            out, tape.Constant(RowTensor(table.items.value.row(t.item))));
        loss_sum += d.value()[0];
        total = k == b ? d : nn::Add(total, d);
      }
      Var loss = nn::Scale(total, 1.0 / static_cast<double>(e - b));
      if (!std::isfinite(loss.value()[0])) {
        throw TrainingError("non-finite inference loss at epoch " +
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
    }

    InferenceEpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(fit.size());
    double dist = 0.0;
    const ForwardContext eval_ctx;
    for (const Target& t : fit) {
      Tape tape(false);
      const Tensor& v =
          Aggregate(tape, phi, reprs_of(tape, t, t.eval_sample, eval_ctx),
                    eval_ctx)
              .value();
      dist += SquaredDistanceOf(v.values(), table.items.value.row(t.item));
    }
    log.distance = dist / static_cast<double>(fit.size());
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.phi = std::move(phi);
  return result;
}

std::vector<InferredEmbedding> InferEmbeddings(
    const SequenceModel& model, const InferenceFunction& phi,
    const std::map<int32_t, ContextSet>& contexts,
    const PopularityPartition& partition, const FewShotConfig& config) {
  const Tensor& items = model.table().items.value;
  if (partition.is_tail.size() != items.rows()) {
    throw DimensionError("partition covers " +
                         std::to_string(partition.is_tail.size()) +
                         " items, the model has " +
                         std::to_string(items.rows()));
  }
  std::vector<InferredEmbedding> out(items.rows());
  for (size_t i = 0; i < items.rows(); ++i) {
    const int32_t item = static_cast<int32_t>(i);
    out[i].item = item;
    if (partition.IsTail(item)) {
      const auto* windows = WindowsOf(contexts, item);
      if (windows) {
        std::vector<ContextWindow> usable = UsableWindows(*windows, phi.kind);
        if (!usable.empty()) {
          usable = CapWindows(usable, config.context_cap,
                              DeriveSeed(config.seed, kCapStream, i));
          out[i].vector =
              AggregateRows(phi, InterpretAll(model.table(), phi, usable));
          out[i].provenance = Provenance::kInferred;
          continue;
        }
      }
    }
    out[i].vector.assign(items.row(i).begin(), items.row(i).end());
  }
  return out;
}

SequenceModel ApplyEmbeddings(const SequenceModel& model,
                              std::span<const InferredEmbedding> inferred) {
  SequenceModel out = model;
  Tensor& items = out.table().items.value;
  for (const InferredEmbedding& e : inferred) {
    if (e.item < 0 || static_cast<size_t>(e.item) >= items.rows()) {
      throw IndexError("embedding for item " + std::to_string(e.item) +
                       " outside the catalog");
    }
    if (e.vector.size() != items.cols()) {
      throw DimensionError("embedding of size " +
                           std::to_string(e.vector.size()) +
                           " for a table of width " +
                           std::to_string(items.cols()));
    }
    if (e.provenance == Provenance::kOriginal) continue;
    std::copy(e.vector.begin(), e.vector.end(), items.row(e.item).begin());
  }
  return out;
}

int32_t InferNewItem(SequenceModel* model, const InferenceFunction& phi,
                     std::span<const ContextWindow> windows, size_t cap,
                     uint64_t seed) {
  const size_t n = model->table().num_items();
  for (const ContextWindow& w : windows) {
    for (const auto* side : {&w.left, &w.right}) {
      for (int32_t t : *side) {
        if (t < 0 || static_cast<size_t>(t) >= n) {
          throw IndexError("context item " + std::to_string(t) +
                           " is not in the catalog");
        }
      }
    }
  }
  std::vector<ContextWindow> usable = UsableWindows(windows, phi.kind);
  if (usable.empty()) throw ContextError("new item has no usable context");
  usable = CapWindows(usable, cap, seed);
  return model->AppendItem(
      AggregateRows(phi, InterpretAll(model->table(), phi, usable)));
}

double MeanReproductionCosine(const SequenceModel& model,
                              const InferenceFunction& phi,
                              const std::map<int32_t, ContextSet>& contexts,
                              std::span<const int32_t> items, size_t cap,
                              uint64_t seed) {
  double sum = 0.0;
  size_t count = 0;
  for (int32_t item : items) {
    const auto* windows = WindowsOf(contexts, item);
    if (!windows) continue;
    std::vector<ContextWindow> usable = UsableWindows(*windows, phi.kind);
    if (usable.empty()) continue;
    usable = CapWindows(usable, cap, DeriveSeed(seed, kCapStream, item));
    const std::vector<double> v =
        AggregateRows(phi, InterpretAll(model.table(), phi, usable));
    const auto row = model.table().items.value.row(item);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t j = 0; j < v.size(); ++j) {
      dot += v[j] * row[j];
      na += v[j] * v[j];
      nb += row[j] * row[j];
    }
    sum += dot / std::sqrt(na * nb);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double MeanReproductionError(const SequenceModel& model,
                             const InferenceFunction& phi,
                             const std::map<int32_t, ContextSet>& contexts,
                             std::span<const int32_t> items, size_t kappa,
                             uint64_t seed) {
  double sum = 0.0;
  size_t count = 0;
  for (int32_t item : items) {
    const auto* windows = WindowsOf(contexts, item);
    if (!windows) continue;
    std::vector<ContextWindow> usable = UsableWindows(*windows, phi.kind);
    if (usable.empty()) continue;
    usable = CapWindows(usable, kappa, DeriveSeed(seed, kErrorStream, item));
    const std::vector<double> v =
        AggregateRows(phi, InterpretAll(model.table(), phi, usable));
    sum += SquaredDistanceOf(v, model.table().items.value.row(item));
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double MeanNearestHeadDistance(const Tensor& items,
                               const PopularityPartition& partition) {
  if (partition.head.empty() || partition.tail.empty()) return 0.0;
  double sum = 0.0;
  for (int32_t t : partition.tail) {
    double best = std::numeric_limits<double>::infinity();
    for (int32_t h : partition.head) {
      best = std::min(best, SquaredDistanceOf(items.row(t), items.row(h)));
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(partition.tail.size());
}

json FewShotConfigToJson(const FewShotConfig& c) {
  return {{"kappa_max", c.kappa_max},
          {"few_shot", c.few_shot},
          {"context_cap", c.context_cap},
          {"target_set", TargetSetName(c.target_set)},
          {"interpreter_init", InterpreterInitName(c.interpreter_init)},
          {"interpreter_frozen", c.interpreter_frozen},
          {"aggregator_blocks", c.aggregator_blocks},
          {"aggregator_heads", c.aggregator_heads},
          {"dropout", c.dropout},
          {"lr", c.adam.peak_lr},
          {"warmup_steps", c.adam.warmup_steps},
          {"l2", c.adam.l2},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

FewShotConfig FewShotConfigFromJson(const json& j) {
  if (!j.is_object()) throw ConfigError("few-shot config must be an object");
  FewShotConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "kappa_max") c.kappa_max = v.get<size_t>();
      else if (key == "few_shot") c.few_shot = v.get<bool>();
      else if (key == "context_cap") c.context_cap = v.get<size_t>();
      else if (key == "target_set") c.target_set = ParseTargetSet(v.get<std::string>());
      else if (key == "interpreter_init") c.interpreter_init = ParseInterpreterInit(v.get<std::string>());
      else if (key == "interpreter_frozen") c.interpreter_frozen = v.get<bool>();
      else if (key == "aggregator_blocks") c.aggregator_blocks = v.get<size_t>();
      else if (key == "aggregator_heads") c.aggregator_heads = v.get<size_t>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "lr") c.adam.peak_lr = v.get<double>();
      else if (key == "warmup_steps") c.adam.warmup_steps = v.get<int64_t>();
      else if (key == "l2") c.adam.l2 = v.get<double>();
      else if (key == "epochs") c.epochs = v.get<size_t>();
      else if (key == "batch_size") c.batch_size = v.get<size_t>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else throw ConfigError("unknown few-shot key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad few-shot config: ") + e.what());
  }
  c.Validate();
  return c;
}

Checkpoint InferenceFunctionToCheckpoint(const InferenceFunction& phi,
                                         const FewShotConfig& config,
                                         const std::string& catalog_hash,
                                         const std::string& source_model_hash) {
  Checkpoint c;
  c.kind = "inference";
  c.catalog_hash = catalog_hash;
  ModelConfig mc;
  mc.kind = phi.kind;
  mc.max_len = phi.max_len;
  mc.dim = phi.output.in();
  mc.blocks = phi.interpreter.blocks.size();
  mc.heads = phi.interpreter.blocks.empty()
                 ? 1
                 : phi.interpreter.blocks[0].attention.heads;
  c.config = {{"encoder",
               {{"variant", EncoderKindName(mc.kind)},
                {"dim", mc.dim},
                {"max_len", mc.max_len},
                {"blocks", mc.blocks},
                {"heads", mc.heads}}},
              {"few_shot", FewShotConfigToJson(config)},
              {"source_model", source_model_hash}};
  StoreParameters(phi.Parameters(), &c, "phi/");
  return c;
}

InferenceFunction InferenceFunctionFromCheckpoint(const Checkpoint& c) {
  if (c.kind != "inference") {
    throw FormatError("expected an inference checkpoint, got " + c.kind);
  }
  ModelConfig mc;
  FewShotConfig fc;
  try {
    const json& e = c.config.at("encoder");
    mc.kind = ParseEncoderKind(e.at("variant").get<std::string>());
    mc.dim = e.at("dim").get<size_t>();
    mc.max_len = e.at("max_len").get<size_t>();
    mc.blocks = e.at("blocks").get<size_t>();
    mc.heads = e.at("heads").get<size_t>();
    fc = FewShotConfigFromJson(c.config.at("few_shot"));
  } catch (const json::exception& ex) {
    throw FormatError(std::string("malformed inference checkpoint: ") +
                      ex.what());
  }
  mc.num_items = 1;
  // Structure only; every tensor is then overwritten from the checkpoint.
  fc.interpreter_init = InterpreterInit::kScratch;
  InferenceFunction phi =
      InferenceFunction::Create(SequenceModel::Create(mc, 0), fc);
  LoadParameters(c, phi.Parameters(), "phi/");
  return phi;
}

}  // namespace seqrec
