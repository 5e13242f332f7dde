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

// The sequential recommender: an item-embedding layer, a GRU or transformer
// sequence encoder, and inner-product scoring against the same item table.
//
// Sequences live in a fixed-length frame. Items are right-aligned and the
// leading slots hold kPadToken. The transformer frame has one extra trailing
// slot for the appended [mask] query, so its length is max_len + 1; the GRU
// frame is max_len long.
//
// Pads never act as attention keys and never advance the GRU, so the
// encoders run on the non-pad rows only (the "compact" form). Positional
// rows are still indexed by frame slot, which makes the compact result
// identical to running the full frame with masked attention.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqrec/autodiff.h"
#include "seqrec/layers.h"

namespace seqrec {

enum class EncoderKind { kGru, kTransformer };

std::string EncoderKindName(EncoderKind kind);
// Accepts "gru" or "transformer"; throws ConfigError otherwise.
EncoderKind ParseEncoderKind(const std::string& name);

struct ModelConfig {
  EncoderKind kind = EncoderKind::kTransformer;
  size_t num_items = 0;
  size_t dim = 32;
  size_t max_len = 50;
  size_t blocks = 2;
  size_t heads = 2;
  double dropout = 0.1;
  double init_std = 0.02;
  // Layer norm on the embedding output. Disabling it exposes raw lookups.
  bool embedding_norm = true;

  // Throws ConfigError on inconsistent values.
  void Validate() const;
  size_t frame_length() const {
    return kind == EncoderKind::kTransformer ? max_len + 1 : max_len;
  }
};

// Item lookup, [mask] row, optional learned positions, per-item score bias
// and the embedding layer norm. The pad row is implicit: pad tokens embed to
// an exact zero row and have no storage to update.
struct EmbeddingTable {
  nn::Parameter items;       // [num_items x d]
  nn::Parameter mask;        // [1 x d]
  nn::Parameter positional;  // [frame_length x d] when has_positional
  nn::Parameter item_bias;   // [1 x num_items], zero-initialized
  nn::LayerNormParams norm;
  bool has_positional = false;
  bool apply_norm = true;

  size_t num_items() const { return items.value.rows(); }
  size_t dim() const { return items.value.cols(); }
  void Collect(std::vector<nn::Parameter*>& out);
};

struct EncoderParams {
  EncoderKind kind = EncoderKind::kTransformer;
  // Transformer stack and the output map m = GELU(h W + b).
  std::vector<nn::TransformerBlock> blocks;
  nn::Linear projection;
  // GRU variant.
  nn::GruCell gru;

  static EncoderParams Create(const ModelConfig& config, Rng& rng);
  void Collect(std::vector<nn::Parameter*>& out);
  void SetFrozen(bool frozen);
};

// Per-block states of one forward pass, rows aligned with the input rows.
// Transformer: hidden = H^0..H^N, post_attention = A^0..A^{N-1}.
// GRU: hidden holds one [1 x d] state per consumed item.
struct EncoderActivations {
  std::vector<nn::Tensor> hidden;
  std::vector<nn::Tensor> post_attention;
};

// Compact embedding: tokens contain items or kMaskToken (no pads) and occupy
// frame slots [first_slot, first_slot + n). Returns [n x d].
nn::Var EmbedTokens(nn::Tape& tape, const EmbeddingTable& table,
                    std::span<const int32_t> tokens, size_t first_slot,
                    const nn::ForwardContext& ctx);

// Runs the transformer stack over compact embeddings; returns H^N [n x d].
nn::Var TransformerHidden(nn::Tape& tape, const EncoderParams& encoder,
                          nn::Var embedded, const nn::ForwardContext& ctx,
                          EncoderActivations* activations = nullptr);

// GELU(h W + b) for rows of h.
nn::Var ProjectState(nn::Tape& tape, const EncoderParams& encoder, nn::Var h);

// Runs the GRU over compact embeddings from a zero state; returns the
// hidden state after every step, [n x d].
nn::Var GruStates(nn::Tape& tape, const EncoderParams& encoder,
                  nn::Var embedded, EncoderActivations* activations = nullptr);

// r = m E^T + bias for each row of m, over all real items.
nn::Var ScoreAll(nn::Tape& tape, const EmbeddingTable& table, nn::Var m);

class SequenceModel {
 public:
  SequenceModel() = default;
  static SequenceModel Create(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  EmbeddingTable& table() { return table_; }
  const EmbeddingTable& table() const { return table_; }
  EncoderParams& encoder() { return encoder_; }
  const EncoderParams& encoder() const { return encoder_; }

  // Every parameter in a stable order: table first, then encoder.
  std::vector<nn::Parameter*> Parameters();
  std::vector<const nn::Parameter*> Parameters() const;

  // Full-frame embedding of a padded frame (length frame_length(), or
  // max_len for the transformer, in which case no mask slot is implied).
  // Pad rows are exactly zero. Throws IndexError on bad tokens.
  nn::Var EmbedFrame(nn::Tape& tape, std::span<const int32_t> frame,
                     const nn::ForwardContext& ctx) const;

  // User state m^u for a history. The last max_len items are used; the
  // transformer appends [mask]. An empty history is rejected.
  nn::Var UserState(nn::Tape& tape, std::span<const int32_t> history,
                    const nn::ForwardContext& ctx,
                    EncoderActivations* activations = nullptr) const;

  // Reference path over a padded frame with masked attention (transformer)
  // or pad skipping (GRU). The frame excludes the trailing mask slot, which
  // the transformer appends itself. Used to validate the compact path.
  nn::Var UserStateFromFrame(nn::Tape& tape, std::span<const int32_t> frame,
                             const nn::ForwardContext& ctx,
                             EncoderActivations* activations = nullptr) const;

  // Inference-only helpers.
  std::vector<double> InferUserState(std::span<const int32_t> history) const;
  std::vector<double> ScoreItems(std::span<const double> m,
                                 std::span<const int32_t> items) const;

  // Appends one item row (bias 0) and returns its index.
  int32_t AppendItem(std::span<const double> row);

 private:
  ModelConfig config_;
  EmbeddingTable table_;
  EncoderParams encoder_;
};

}  // namespace seqrec
