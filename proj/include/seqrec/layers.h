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

// Parameterized building blocks on top of the tape: affine maps, layer norm,
// multi-head self-attention, the position-wise feed-forward net, post-norm
// transformer blocks and a GRU cell.

#pragma once

#include <string>
#include <vector>

#include "seqrec/autodiff.h"
#include "seqrec/rng.h"

namespace seqrec::nn {

// Truncated normal init shared by every weight matrix.
struct InitSpec {
  double std = 0.02;
  double bound_stds = 2.0;
};

Parameter MakeWeight(const std::string& name, size_t rows, size_t cols,
                     const InitSpec& init, Rng& rng);
Parameter MakeConstant(const std::string& name, size_t rows, size_t cols,
                       double value);

// Per-step state threaded through a forward pass.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  Rng* rng = nullptr;

  Var Drop(Var x) const { return Dropout(x, dropout, training, rng); }
};

// x [n x in] -> x W + b, W [in x out], b [1 x out].
struct Linear {
  Parameter weight;
  Parameter bias;

  static Linear Create(const std::string& name, size_t in, size_t out,
                       const InitSpec& init, Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  void Collect(std::vector<Parameter*>& out);
  size_t in() const { return weight.value.rows(); }
  size_t out() const { return weight.value.cols(); }
};

struct LayerNormParams {
  Parameter gain;
  Parameter bias;

  static LayerNormParams Create(const std::string& name, size_t dim);
  Var Forward(Tape& tape, Var x) const;
  void Collect(std::vector<Parameter*>& out);
};

// Bidirectional scaled dot-product attention with `heads` heads. Keys with
// key_valid[j] == false receive kMaskedLogit before the softmax; an empty
// key_valid attends to everything.
struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  size_t heads = 1;

  static MultiHeadAttention Create(const std::string& name, size_t dim,
                                   size_t heads, const InitSpec& init,
                                   Rng& rng);
  Var Forward(Tape& tape, Var x, const std::vector<bool>& key_valid) const;
  void Collect(std::vector<Parameter*>& out);
};

// GELU(x W1 + b1) W2 + b2 with inner width 4 * dim.
struct FeedForward {
  Linear inner;
  Linear outer;

  static FeedForward Create(const std::string& name, size_t dim,
                            const InitSpec& init, Rng& rng);
  Var Forward(Tape& tape, Var x) const;
  void Collect(std::vector<Parameter*>& out);
};

// A = LN(H + Dropout(MHA(H))); H' = LN(A + Dropout(PWFF(A))).
struct TransformerBlock {
  MultiHeadAttention attention;
  LayerNormParams attention_norm;
  FeedForward feed_forward;
  LayerNormParams output_norm;

  static TransformerBlock Create(const std::string& name, size_t dim,
                                 size_t heads, const InitSpec& init, Rng& rng);
  // Returns H'. If post_attention is non-null it receives A.
  Var Forward(Tape& tape, Var h, const std::vector<bool>& key_valid,
              const ForwardContext& ctx, Var* post_attention = nullptr) const;
  void Collect(std::vector<Parameter*>& out);
};

// Single-layer GRU:
//   z  = sigmoid(x Wz + h Uz + bz)
//   r  = sigmoid(x Wr + h Ur + br)
//   h~ = tanh(x Wh + (r * h) Uh + bh)
//   h' = (1 - z) * h + z * h~
// Input weights are packed as [Wz | Wr | Wh] (d x 3d) with bias (1 x 3d);
// recurrent gate weights as [Uz | Ur] (d x 2d); Uh is d x d.
struct GruCell {
  Parameter input_weight;
  Parameter input_bias;
  Parameter gate_weight;
  Parameter candidate_weight;

  static GruCell Create(const std::string& name, size_t dim,
                        const InitSpec& init, Rng& rng);
  // x and h are [b x d]; returns the next hidden state [b x d].
  Var Step(Tape& tape, Var x, Var h) const;
  void Collect(std::vector<Parameter*>& out);
  size_t dim() const { return candidate_weight.value.rows(); }
};

}  // namespace seqrec::nn
