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

#include "seqrec/layers.h"

#include <cmath>

#include "seqrec/errors.h"

namespace seqrec::nn {

Parameter MakeWeight(const std::string& name, size_t rows, size_t cols,
                     const InitSpec& init, Rng& rng) {
  Tensor t = Tensor::Matrix(rows, cols);
  for (double& v : t.values()) v = rng.TruncatedNormal(init.std, init.bound_stds);
  return Parameter{name, std::move(t)};
}

Parameter MakeConstant(const std::string& name, size_t rows, size_t cols,
                       double value) {
  return Parameter{name, Tensor::Matrix(rows, cols, value)};
}

Linear Linear::Create(const std::string& name, size_t in, size_t out,
                      const InitSpec& init, Rng& rng) {
  Linear l;
  l.weight = MakeWeight(name + ".weight", in, out, init, rng);
  l.bias = MakeConstant(name + ".bias", 1, out, 0.0);
  return l;
}

Var Linear::Forward(Tape& tape, Var x) const {
  return AddRow(MatMul(x, tape.Param(weight)), tape.Param(bias));
}

void Linear::Collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNormParams LayerNormParams::Create(const std::string& name, size_t dim) {
  return {MakeConstant(name + ".gain", 1, dim, 1.0),
          MakeConstant(name + ".bias", 1, dim, 0.0)};
}

Var LayerNormParams::Forward(Tape& tape, Var x) const {
  return LayerNorm(x, tape.Param(gain), tape.Param(bias));
}

void LayerNormParams::Collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

MultiHeadAttention MultiHeadAttention::Create(const std::string& name,
                                              size_t dim, size_t heads,
                                              const InitSpec& init, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(dim) +
                      " is not divisible by head count " +
                      std::to_string(heads));
  }
  MultiHeadAttention m;
  m.query = Linear::Create(name + ".query", dim, dim, init, rng);
  m.key = Linear::Create(name + ".key", dim, dim, init, rng);
  m.value = Linear::Create(name + ".value", dim, dim, init, rng);
  m.output = Linear::Create(name + ".output", dim, dim, init, rng);
  m.heads = heads;
  return m;
}

Var MultiHeadAttention::Forward(Tape& tape, Var x,
                                const std::vector<bool>& key_valid) const {
  const size_t n = x.value().rows();
  const size_t dim = query.out();
  const size_t head_dim = dim / heads;
  if (!key_valid.empty() && key_valid.size() != n) {
    throw DimensionError("attention key mask has " +
                         std::to_string(key_valid.size()) + " entries for " +
                         std::to_string(n) + " positions");
  }
  Var q = query.Forward(tape, x);
  Var k = key.Forward(tape, x);
  Var v = value.Forward(tape, x);

  Var bias;
  if (!key_valid.empty()) {
    Tensor mask = Tensor::Matrix(n, n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) {
        if (!key_valid[j]) mask.at(i, j) = kMaskedLogit;
      }
    }
    bias = tape.Constant(std::move(mask));
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (size_t h = 0; h < heads; ++h) {
    Var qh = SliceCols(q, h * head_dim, head_dim);
    Var kh = SliceCols(k, h * head_dim, head_dim);
    Var vh = SliceCols(v, h * head_dim, head_dim);
    Var logits = Scale(MatMulBT(qh, kh), scale);
    if (bias.valid()) logits = Add(logits, bias);
    outputs.push_back(MatMul(Softmax(logits), vh));
  }
  Var merged = heads == 1 ? outputs[0] : ConcatCols(outputs);
  return output.Forward(tape, merged);
}

void MultiHeadAttention::Collect(std::vector<Parameter*>& out) {
  query.Collect(out);
  key.Collect(out);
  value.Collect(out);
  output.Collect(out);
}

FeedForward FeedForward::Create(const std::string& name, size_t dim,
                                const InitSpec& init, Rng& rng) {
  return {Linear::Create(name + ".inner", dim, 4 * dim, init, rng),
          Linear::Create(name + ".outer", 4 * dim, dim, init, rng)};
}

Var FeedForward::Forward(Tape& tape, Var x) const {
  return outer.Forward(tape, Gelu(inner.Forward(tape, x)));
}

void FeedForward::Collect(std::vector<Parameter*>& out) {
  inner.Collect(out);
  outer.Collect(out);
}

TransformerBlock TransformerBlock::Create(const std::string& name, size_t dim,
                                          size_t heads, const InitSpec& init,
                                          Rng& rng) {
  TransformerBlock b;
  b.attention = MultiHeadAttention::Create(name + ".attention", dim, heads,
                                           init, rng);
  b.attention_norm = LayerNormParams::Create(name + ".attention_norm", dim);
  b.feed_forward = FeedForward::Create(name + ".feed_forward", dim, init, rng);
  b.output_norm = LayerNormParams::Create(name + ".output_norm", dim);
  return b;
}

Var TransformerBlock::Forward(Tape& tape, Var h,
                              const std::vector<bool>& key_valid,
                              const ForwardContext& ctx,
                              Var* post_attention) const {
  Var a = attention_norm.Forward(
      tape, Add(h, ctx.Drop(attention.Forward(tape, h, key_valid))));
  if (post_attention != nullptr) *post_attention = a;
  return output_norm.Forward(
      tape, Add(a, ctx.Drop(feed_forward.Forward(tape, a))));
}

void TransformerBlock::Collect(std::vector<Parameter*>& out) {
  attention.Collect(out);
  attention_norm.Collect(out);
  feed_forward.Collect(out);
  output_norm.Collect(out);
}

GruCell GruCell::Create(const std::string& name, size_t dim,
                        const InitSpec& init, Rng& rng) {
  GruCell c;
  c.input_weight = MakeWeight(name + ".input_weight", dim, 3 * dim, init, rng);
  c.input_bias = MakeConstant(name + ".input_bias", 1, 3 * dim, 0.0);
  c.gate_weight = MakeWeight(name + ".gate_weight", dim, 2 * dim, init, rng);
  c.candidate_weight =
      MakeWeight(name + ".candidate_weight", dim, dim, init, rng);
  return c;
}

Var GruCell::Step(Tape& tape, Var x, Var h) const {
  const size_t d = dim();
  Var xw = AddRow(MatMul(x, tape.Param(input_weight)), tape.Param(input_bias));
  Var hu = MatMul(h, tape.Param(gate_weight));
  Var z = Sigmoid(Add(SliceCols(xw, 0, d), SliceCols(hu, 0, d)));
  Var r = Sigmoid(Add(SliceCols(xw, d, d), SliceCols(hu, d, d)));
  Var candidate = Tanh(Add(SliceCols(xw, 2 * d, d),
                           MatMul(Mul(r, h), tape.Param(candidate_weight))));
  return Add(h, Mul(z, Sub(candidate, h)));
}

void GruCell::Collect(std::vector<Parameter*>& out) {
  out.push_back(&input_weight);
  out.push_back(&input_bias);
  out.push_back(&gate_weight);
  out.push_back(&candidate_weight);
}

}  // namespace seqrec::nn
