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

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records primitive operations as they execute. Each recorded node
// owns its forward value (or views a Parameter's storage) and, once Backward
// runs, a gradient of the same shape. Parameters enter a tape through
// Tape::Param, which memoizes one node per parameter so that shared weights
// (the item table used both for lookup and for scoring) accumulate a single
// gradient.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqrec/rng.h"
#include "seqrec/tensor.h"

namespace seqrec::nn {

struct Parameter {
  std::string name;
  Tensor value;
  // Frozen parameters enter tapes as constants and are skipped by Adam.
  bool frozen = false;
};

// Per-parameter gradient accumulator, keyed by parameter identity.
class GradientBuffer {
 public:
  // Returns the gradient for p, or nullptr when nothing was accumulated.
  const Tensor* Find(const Parameter& p) const;
  void Add(const Parameter& p, const Tensor& grad);
  void Scale(double factor);
  void Clear() { grads_.clear(); }
  size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const Parameter*, Tensor> grads_;
};

class Tape;

// Lightweight handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  // Gradient after Tape::Backward. Zero-filled if nothing flowed here.
  const Tensor& grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  // With grad_enabled=false every node is a constant and nothing is kept
  // for the backward pass; used for evaluation.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var Constant(Tensor value);
  // Differentiable free input (used by gradient checks).
  Var Leaf(Tensor value);
  // Views p.value without copying; p must outlive the tape and stay
  // unmodified until the tape is discarded.
  Var Param(const Parameter& p);

  // Records an op output. fn runs during Backward if any input requires a
  // gradient.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  // Seeds d(loss)/d(loss)=1 and replays recorded ops in reverse order.
  // Returns the number of backward closures executed; each recorded op runs
  // at most once.
  size_t Backward(Var loss);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Mutable gradient, allocated zero-filled on first access.
  Tensor& grad(int id);
  const Tensor& grad_or_zero(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  // Adds every parameter-node gradient into out.
  void AccumulateInto(GradientBuffer& out) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* view = nullptr;
    Tensor grad;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;
  };

  Var Push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
  bool grad_enabled_;
};

// Token ids used by sequence ops. Non-negative ids index item rows.
inline constexpr int32_t kPadToken = -1;
inline constexpr int32_t kMaskToken = -2;

// Additive logit for excluded attention keys; exp() of it underflows to an
// exact zero while the value stays finite.
inline constexpr double kMaskedLogit = -1e30;

// ---- primitive ops ----------------------------------------------------------

// [m x k] * [k x n].
Var MatMul(Var a, Var b);
// [m x k] * [n x k]^T.
Var MatMulBT(Var a, Var b);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
// a [m x n] + row [1 x n] broadcast over rows.
Var AddRow(Var a, Var row);
Var Scale(Var a, double factor);
Var Sigmoid(Var x);
Var Tanh(Var x);
// Exact x * Phi(x) using erf.
Var Gelu(Var x);
// Softmax along `axis` of a rank-2 (or higher) tensor; axis may be negative.
Var Softmax(Var x, int axis = -1);
// Row-wise normalization over the last dimension; gain and bias are [1 x n].
Var LayerNorm(Var x, Var gain, Var bias, double eps = 1e-12);
// Inverted dropout. Identity when !training or rate == 0.
Var Dropout(Var x, double rate, bool training, Rng* rng);
// Row lookup. Items index `table`, kMaskToken reads `mask_row`, kPadToken
// yields a zero row that receives no gradient.
Var GatherRows(Var table, Var mask_row, std::span<const int32_t> tokens);
Var SliceRows(Var x, size_t begin, size_t count);
Var SliceCols(Var x, size_t begin, size_t count);
Var ConcatRows(const std::vector<Var>& parts);
Var ConcatCols(const std::vector<Var>& parts);
Var MeanRows(Var x);
Var Sum(Var x);
// Sum of squared differences, a scalar.
Var SquaredDistance(Var a, Var b);
// Sum over rows r of -log softmax(logits[r])[targets[r]].
Var SoftmaxCrossEntropy(Var logits, std::span<const int32_t> targets);

// Forward-only helpers shared with non-differentiable code paths.
double GeluScalar(double x);

}  // namespace seqrec::nn
