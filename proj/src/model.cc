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

#include "seqrec/model.h"

#include <algorithm>

#include "seqrec/errors.h"

namespace seqrec {

using nn::ForwardContext;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string EncoderKindName(EncoderKind kind) {
  return kind == EncoderKind::kGru ? "gru" : "transformer";
}

EncoderKind ParseEncoderKind(const std::string& name) {
  if (name == "gru") return EncoderKind::kGru;
  if (name == "transformer") return EncoderKind::kTransformer;
  throw ConfigError("unknown encoder variant '" + name +
                    "' (expected gru or transformer)");
}

void ModelConfig::Validate() const {
  if (num_items == 0) throw ConfigError("model needs at least one item");
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  if (max_len < 2) {
    throw ConfigError("max_len must be at least 2, got " +
                      std::to_string(max_len));
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ParameterError("dropout must lie in [0, 1)");
  }
  if (init_std <= 0.0) throw ConfigError("init_std must be positive");
  if (kind == EncoderKind::kTransformer) {
    if (blocks == 0) throw ConfigError("transformer needs at least one block");
    if (heads == 0 || dim % heads != 0) {
      throw ConfigError("model dimension " + std::to_string(dim) +
                        " is not divisible by head count " +
                        std::to_string(heads));
    }
  }
}

void EmbeddingTable::Collect(std::vector<Parameter*>& out) {
  out.push_back(&items);
  out.push_back(&mask);
  if (has_positional) out.push_back(&positional);
  out.push_back(&item_bias);
  if (apply_norm) norm.Collect(out);
}

EncoderParams EncoderParams::Create(const ModelConfig& config, Rng& rng) {
  const nn::InitSpec init{config.init_std, 2.0};
  EncoderParams p;
  p.kind = config.kind;
  if (config.kind == EncoderKind::kTransformer) {
    for (size_t b = 0; b < config.blocks; ++b) {
      p.blocks.push_back(nn::TransformerBlock::Create(
          "encoder.block" + std::to_string(b), config.dim, config.heads, init,
          rng));
    }
    p.projection = nn::Linear::Create("encoder.projection", config.dim,
                                      config.dim, init, rng);
  } else {
    p.gru = nn::GruCell::Create("encoder.gru", config.dim, init, rng);
  }
  return p;
}

void EncoderParams::Collect(std::vector<Parameter*>& out) {
  if (kind == EncoderKind::kTransformer) {
    for (auto& b : blocks) b.Collect(out);
    projection.Collect(out);
  } else {
    gru.Collect(out);
  }
}

void EncoderParams::SetFrozen(bool frozen) {
  std::vector<Parameter*> params;
  Collect(params);
  for (Parameter* p : params) p->frozen = frozen;
}

Var EmbedTokens(Tape& tape, const EmbeddingTable& table,
                std::span<const int32_t> tokens, size_t first_slot,
                const ForwardContext& ctx) {
  for (int32_t t : tokens) {
    if (t == nn::kPadToken) {
      throw IndexError("compact embedding input contains a pad token");
    }
  }
  Var x = nn::GatherRows(tape.Param(table.items), tape.Param(table.mask),
                         tokens);
  if (table.has_positional) {
    if (first_slot + tokens.size() > table.positional.value.rows()) {
      throw IndexError("sequence of " + std::to_string(tokens.size()) +
                       " tokens at slot " + std::to_string(first_slot) +
                       " exceeds the positional table");
    }
    x = Add(x, SliceRows(tape.Param(table.positional), first_slot,
                         tokens.size()));
  }
  if (table.apply_norm) x = table.norm.Forward(tape, x);
  return ctx.Drop(x);
}

Var TransformerHidden(Tape& tape, const EncoderParams& encoder, Var embedded,
                      const ForwardContext& ctx,
                      EncoderActivations* activations) {
  Var h = embedded;
  if (activations) activations->hidden.push_back(h.value());
  for (const auto& block : encoder.blocks) {
    Var a;
    h = block.Forward(tape, h, {}, ctx, &a);
    if (activations) {
      activations->post_attention.push_back(a.value());
      activations->hidden.push_back(h.value());
    }
  }
  return h;
}

Var ProjectState(Tape& tape, const EncoderParams& encoder, Var h) {
  return nn::Gelu(encoder.projection.Forward(tape, h));
}

Var GruStates(Tape& tape, const EncoderParams& encoder, Var embedded,
              EncoderActivations* activations) {
  const size_t n = embedded.value().rows();
  const size_t d = encoder.gru.dim();
  Var h = tape.Constant(Tensor::Matrix(1, d));
  std::vector<Var> states;
  states.reserve(n);
  for (size_t t = 0; t < n; ++t) {
    h = encoder.gru.Step(tape, SliceRows(embedded, t, 1), h);
    states.push_back(h);
    if (activations) activations->hidden.push_back(h.value());
  }
  return n == 1 ? states[0] : nn::ConcatRows(states);
}

Var ScoreAll(Tape& tape, const EmbeddingTable& table, Var m) {
  return AddRow(MatMulBT(m, tape.Param(table.items)),
                tape.Param(table.item_bias));
}

SequenceModel SequenceModel::Create(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  Rng rng(seed);
  const nn::InitSpec init{config.init_std, 2.0};
  SequenceModel m;
  m.config_ = config;
  EmbeddingTable& t = m.table_;
  t.items = nn::MakeWeight("embedding.items", config.num_items, config.dim,
                           init, rng);
  t.mask = nn::MakeWeight("embedding.mask", 1, config.dim, init, rng);
  // The GRU never reads [mask]; keep it out of optimization.
  t.mask.frozen = config.kind == EncoderKind::kGru;
  t.has_positional = config.kind == EncoderKind::kTransformer;
  if (t.has_positional) {
    t.positional = nn::MakeWeight("embedding.positional",
                                  config.frame_length(), config.dim, init, rng);
  }
  t.item_bias = nn::MakeConstant("embedding.item_bias", 1, config.num_items,
                                 0.0);
  t.apply_norm = config.embedding_norm;
  t.norm = nn::LayerNormParams::Create("embedding.norm", config.dim);
  m.encoder_ = EncoderParams::Create(config, rng);
  return m;
}

std::vector<Parameter*> SequenceModel::Parameters() {
  std::vector<Parameter*> out;
  table_.Collect(out);
  encoder_.Collect(out);
  return out;
}

std::vector<const Parameter*> SequenceModel::Parameters() const {
  auto params = const_cast<SequenceModel*>(this)->Parameters();
  return {params.begin(), params.end()};
}

Var SequenceModel::EmbedFrame(Tape& tape, std::span<const int32_t> frame,
                              const ForwardContext& ctx) const {
  const size_t n = frame.size();
  if (n == 0 || n > config_.frame_length()) {
    throw IndexError("frame of length " + std::to_string(n) +
                     " does not fit max frame " +
                     std::to_string(config_.frame_length()));
  }
  Var x = nn::GatherRows(tape.Param(table_.items), tape.Param(table_.mask),
                         frame);
  if (table_.has_positional) {
    x = Add(x, SliceRows(tape.Param(table_.positional), 0, n));
  }
  if (table_.apply_norm) x = table_.norm.Forward(tape, x);
  x = ctx.Drop(x);
  Tensor keep = Tensor::Matrix(n, table_.dim(), 1.0);
  bool any_pad = false;
  for (size_t r = 0; r < n; ++r) {
    if (frame[r] == nn::kPadToken) {
      any_pad = true;
      for (double& v : keep.row(r)) v = 0.0;
    }
  }
  return any_pad ? Mul(x, tape.Constant(std::move(keep))) : x;
}

Var SequenceModel::UserState(Tape& tape, std::span<const int32_t> history,
                             const ForwardContext& ctx,
                             EncoderActivations* activations) const {
  if (history.empty()) throw ContextError("cannot encode an empty history");
  const size_t n = std::min(history.size(), config_.max_len);
  std::span<const int32_t> recent = history.subspan(history.size() - n);
  if (config_.kind == EncoderKind::kGru) {
    Var e = EmbedTokens(tape, table_, recent, 0, ctx);
    Var states = GruStates(tape, encoder_, e, activations);
    return SliceRows(states, n - 1, 1);
  }
  std::vector<int32_t> tokens(recent.begin(), recent.end());
  tokens.push_back(nn::kMaskToken);
  Var e = EmbedTokens(tape, table_, tokens, config_.max_len - n, ctx);
  Var h = TransformerHidden(tape, encoder_, e, ctx, activations);
  return ProjectState(tape, encoder_, SliceRows(h, n, 1));
}

Var SequenceModel::UserStateFromFrame(Tape& tape,
                                      std::span<const int32_t> frame,
                                      const ForwardContext& ctx,
                                      EncoderActivations* activations) const {
  if (frame.size() != config_.max_len) {
    throw DimensionError("frame length " + std::to_string(frame.size()) +
                         " differs from max_len " +
                         std::to_string(config_.max_len));
  }
  if (config_.kind == EncoderKind::kGru) {
    std::vector<int32_t> items;
    for (int32_t t : frame) {
      if (t != nn::kPadToken) items.push_back(t);
    }
    if (items.empty()) throw ContextError("frame holds only padding");
    Var states =
        GruStates(tape, encoder_, EmbedTokens(tape, table_, items, 0, ctx),
                  activations);
    return SliceRows(states, items.size() - 1, 1);
  }
  std::vector<int32_t> tokens(frame.begin(), frame.end());
  tokens.push_back(nn::kMaskToken);
  std::vector<bool> valid(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    valid[i] = tokens[i] != nn::kPadToken;
  }
  Var h = EmbedFrame(tape, tokens, ctx);
  if (activations) activations->hidden.push_back(h.value());
  for (const auto& block : encoder_.blocks) {
    Var a;
    h = block.Forward(tape, h, valid, ctx, &a);
    if (activations) {
      activations->post_attention.push_back(a.value());
      activations->hidden.push_back(h.value());
    }
  }
  return ProjectState(tape, encoder_, SliceRows(h, tokens.size() - 1, 1));
}

std::vector<double> SequenceModel::InferUserState(
    std::span<const int32_t> history) const {
  Tape tape(false);
  Var m = UserState(tape, history, ForwardContext{});
  return {m.value().values().begin(), m.value().values().end()};
}

std::vector<double> SequenceModel::ScoreItems(
    std::span<const double> m, std::span<const int32_t> items) const {
  const size_t d = table_.dim();
  if (m.size() != d) {
    throw DimensionError("user state of length " + std::to_string(m.size()) +
                         " against dimension " + std::to_string(d));
  }
  std::vector<double> scores;
  scores.reserve(items.size());
  for (int32_t j : items) {
    if (j < 0 || static_cast<size_t>(j) >= table_.num_items()) {
      throw IndexError("item index " + std::to_string(j) + " out of range");
    }
    auto row = table_.items.value.row(j);
    double s = 0.0;
    for (size_t k = 0; k < d; ++k) s += m[k] * row[k];
    scores.push_back(s + table_.item_bias.value[j]);
  }
  return scores;
}

int32_t SequenceModel::AppendItem(std::span<const double> row) {
  const size_t d = table_.dim();
  if (row.size() != d) {
    throw DimensionError("new item row of length " +
                         std::to_string(row.size()) + " against dimension " +
                         std::to_string(d));
  }
  const size_t n = table_.num_items();
  Tensor items = Tensor::Matrix(n + 1, d);
  std::copy(table_.items.value.values().begin(),
            table_.items.value.values().end(), items.values().begin());
  std::copy(row.begin(), row.end(), items.row(n).begin());
  Tensor bias = Tensor::Matrix(1, n + 1);
  std::copy(table_.item_bias.value.values().begin(),
            table_.item_bias.value.values().end(), bias.values().begin());
  table_.items.value = std::move(items);
  table_.item_bias.value = std::move(bias);
  config_.num_items = n + 1;
  return static_cast<int32_t>(n);
}

}  // namespace seqrec
