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

#include "seqrec/autodiff.h"

#include <algorithm>
#include <cmath>
#include <memory>

#include "seqrec/errors.h"

namespace seqrec::nn {

// ---- GradientBuffer ---------------------------------------------------------

const Tensor* GradientBuffer::Find(const Parameter& p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

void GradientBuffer::Add(const Parameter& p, const Tensor& grad) {
  auto it = grads_.find(&p);
  if (it == grads_.end()) {
    grads_.emplace(&p, grad);
  } else {
    it->second.AddInPlace(grad);
  }
}

void GradientBuffer::Scale(double factor) {
  for (auto& [p, g] : grads_) {
    for (double& v : g.values()) v *= factor;
  }
}

// ---- Var / Tape -------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad_or_zero(id_); }

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return Push(std::move(n));
}

Var Tape::Leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = grad_enabled_;
  return Push(std::move(n));
}

Var Tape::Param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.view = &p.value;
  n.requires_grad = grad_enabled_ && !p.frozen;
  n.param = n.requires_grad ? &p : nullptr;
  Var v = Push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  return Record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::Record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (in.valid() && nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return Push(std::move(n));
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.view ? *n.view : n.owned;
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::grad_or_zero(int id) { return grad(id); }

size_t Tape::Backward(Var loss) {
  if (loss.tape() != this) throw Error("loss belongs to a different tape");
  if (value(loss.id()).size() != 1) {
    throw DimensionError("backward requires a scalar loss, got " +
                         value(loss.id()).ShapeString());
  }
  if (!nodes_[loss.id()].requires_grad) return 0;
  grad(loss.id())[0] += 1.0;
  size_t replayed = 0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
    ++replayed;
  }
  return replayed;
}

void Tape::AccumulateInto(GradientBuffer& out) const {
  for (const Node& n : nodes_) {
    if (n.param && !n.grad.empty()) out.Add(*n.param, n.grad);
  }
}

// ---- ops ---------------------------------------------------------------------

namespace {

Tape& TapeOf(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw Error("invalid Var passed to op");
    if (t && v.tape() != t) throw Error("ops mix vars from different tapes");
    t = v.tape();
  }
  return *t;
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         a.ShapeString() + " vs " + b.ShapeString());
  }
}

template <typename F>
Var Unary(Var x, F&& forward_fn, std::function<double(double, double)> deriv) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = forward_fn(xv[i]);
  const int xi = x.id();
  return t.Record(std::move(out), {x}, [xi, deriv](Tape& tp, int self) {
    if (!tp.requires_grad(xi)) return;
    const Tensor& g = tp.grad(self);
    const Tensor& xv = tp.value(xi);
    const Tensor& yv = tp.value(self);
    Tensor& gx = tp.grad(xi);
    for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var MatMul(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree, " +
                         av.ShapeString() + " x " + bv.ShapeString());
  }
  Tensor out = Tensor::Matrix(m, n);
  const double* A = av.data();
  const double* B = bv.data();
  double* C = out.data();
  for (size_t i = 0; i < m; ++i) {
    for (size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const int ai = a.id(), bi = b.id();
  return t.Record(std::move(out), {a, b}, [ai, bi, m, k, n](Tape& tp, int self) {
    const double* G = tp.grad(self).data();
    const double* A = tp.value(ai).data();
    const double* B = tp.value(bi).data();
    if (tp.requires_grad(ai)) {
      double* GA = tp.grad(ai).data();
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          const double* grow = G + i * n;
          double s = 0.0;
          for (size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          GA[i * k + p] += s;
        }
      }
    }
    if (tp.requires_grad(bi)) {
      double* GB = tp.grad(bi).data();
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          const double* grow = G + i * n;
          double* gbrow = GB + p * n;
          for (size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

Var MatMulBT(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) {
    throw DimensionError("matmul_bt: inner dimensions disagree, " +
                         av.ShapeString() + " x " + bv.ShapeString() + "^T");
  }
  Tensor out = Tensor::Matrix(m, n);
  const double* A = av.data();
  const double* B = bv.data();
  double* C = out.data();
  for (size_t i = 0; i < m; ++i) {
    const double* arow = A + i * k;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = B + j * k;
      double s = 0.0;
      for (size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      C[i * n + j] = s;
    }
  }
  const int ai = a.id(), bi = b.id();
  return t.Record(std::move(out), {a, b}, [ai, bi, m, k, n](Tape& tp, int self) {
    const double* G = tp.grad(self).data();
    const double* A = tp.value(ai).data();
    const double* B = tp.value(bi).data();
    if (tp.requires_grad(ai)) {
      double* GA = tp.grad(ai).data();
      for (size_t i = 0; i < m; ++i) {
        double* garow = GA + i * k;
        for (size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          const double* brow = B + j * k;
          for (size_t p = 0; p < k; ++p) garow[p] += g * brow[p];
        }
      }
    }
    if (tp.requires_grad(bi)) {
      double* GB = tp.grad(bi).data();
      for (size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        for (size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          double* gbrow = GB + j * k;
          for (size_t p = 0; p < k; ++p) gbrow[p] += g * arow[p];
        }
      }
    }
  });
}

Var Add(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  RequireSameShape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.AddInPlace(b.value());
  const int ai = a.id(), bi = b.id();
  return t.Record(std::move(out), {a, b}, [ai, bi](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ai)) tp.grad(ai).AddInPlace(g);
    if (tp.requires_grad(bi)) tp.grad(bi).AddInPlace(g);
  });
}

Var Sub(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  RequireSameShape(a.value(), b.value(), "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ai = a.id(), bi = b.id();
  return t.Record(std::move(out), {a, b}, [ai, bi](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ai)) tp.grad(ai).AddInPlace(g);
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad(bi);
      for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Mul(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  RequireSameShape(a.value(), b.value(), "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ai = a.id(), bi = b.id();
  return t.Record(std::move(out), {a, b}, [ai, bi](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ai)) {
      const Tensor& bv = tp.value(bi);
      Tensor& ga = tp.grad(ai);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(bi)) {
      const Tensor& av = tp.value(ai);
      Tensor& gb = tp.grad(bi);
      for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var AddRow(Var a, Var row) {
  Tape& t = TapeOf({a, row});
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  const size_t m = av.rows(), n = av.cols();
  if (rv.size() != n) {
    throw DimensionError("add_row: row " + rv.ShapeString() +
                         " does not broadcast over " + av.ShapeString());
  }
  Tensor out = av;
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  }
  const int ai = a.id(), ri = row.id();
  return t.Record(std::move(out), {a, row}, [ai, ri, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ai)) tp.grad(ai).AddInPlace(g);
    if (tp.requires_grad(ri)) {
      Tensor& gr = tp.grad(ri);
      for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
      }
    }
  });
}

Var Scale(Var a, double factor) {
  return Unary(
      a, [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var Sigmoid(Var x) {
  return Unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tanh(Var x) {
  return Unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

double GeluScalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

Var Gelu(Var x) {
  return Unary(x, GeluScalar, [](double v, double) {
    const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
    return cdf + v * pdf;
  });
}

Var Softmax(Var x, int axis) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const Shape& shape = xv.shape();
  const int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("softmax: axis out of range for " + xv.ShapeString());
  }
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < rank; ++i) inner *= shape[i];
  const size_t n = shape[axis];
  Tensor out(shape);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * n * inner + in;
      double mx = xv[base];
      for (size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double total = 0.0;
      for (size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (size_t j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  const int xi = x.id();
  return t.Record(std::move(out), {x},
                  [xi, outer, inner, n](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    const Tensor& y = tp.value(self);
                    Tensor& gx = tp.grad(xi);
                    for (size_t o = 0; o < outer; ++o) {
                      for (size_t in = 0; in < inner; ++in) {
                        const size_t base = o * n * inner + in;
                        double dot = 0.0;
                        for (size_t j = 0; j < n; ++j) {
                          dot += g[base + j * inner] * y[base + j * inner];
                        }
                        for (size_t j = 0; j < n; ++j) {
                          const size_t idx = base + j * inner;
                          gx[idx] += y[idx] * (g[idx] - dot);
                        }
                      }
                    }
                  });
}

Var LayerNorm(Var x, Var gain, Var bias, double eps) {
  Tape& t = TapeOf({x, gain, bias});
  const Tensor& xv = x.value();
  const size_t m = xv.rows(), n = xv.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw DimensionError("layer_norm: gain/bias of size " +
                         std::to_string(gain.value().size()) + "/" +
                         std::to_string(bias.value().size()) +
                         " for rows of width " + std::to_string(n));
  }
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  // Cache normalized values and inverse std for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  for (size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double mean = 0.0;
    for (size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[i * n + j] = h;
      out[i * n + j] = gv[j] * h + bv[j];
    }
  }
  const int xi = x.id(), gi = gain.id(), bi = bias.id();
  return t.Record(
      std::move(out), {x, gain, bias},
      [xi, gi, bi, m, n, xhat, inv_std](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& gv = tp.value(gi);
        if (tp.requires_grad(gi)) {
          Tensor& gg = tp.grad(gi);
          for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) {
              gg[j] += g[i * n + j] * (*xhat)[i * n + j];
            }
          }
        }
        if (tp.requires_grad(bi)) {
          Tensor& gb = tp.grad(bi);
          for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
          }
        }
        if (tp.requires_grad(xi)) {
          Tensor& gx = tp.grad(xi);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (size_t i = 0; i < m; ++i) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              sum_d += d;
              sum_dx += d * (*xhat)[i * n + j];
            }
            for (size_t j = 0; j < n; ++j) {
              const double d = g[i * n + j] * gv[j];
              gx[i * n + j] += (*inv_std)[i] *
                               (d - inv_n * sum_d -
                                (*xhat)[i * n + j] * inv_n * sum_dx);
            }
          }
        }
      });
}

Var Dropout(Var x, double rate, bool training, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must lie in [0, 1), got " +
                         std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) throw ParameterError("dropout in training needs an rng");
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng->Uniform() < rate ? 0.0 : keep_scale;
  }
  Var m = t.Constant(std::move(mask));
  return Mul(x, m);
}

Var GatherRows(Var table, Var mask_row, std::span<const int32_t> tokens) {
  Tape& t = *table.tape();
  const Tensor& tv = table.value();
  const size_t rows = tv.rows(), d = tv.cols();
  if (tokens.empty()) throw DimensionError("gather_rows: empty token list");
  Tensor out = Tensor::Matrix(tokens.size(), d);
  for (size_t r = 0; r < tokens.size(); ++r) {
    const int32_t tok = tokens[r];
    if (tok == kPadToken) continue;
    const double* src;
    if (tok == kMaskToken) {
      if (!mask_row.valid() || mask_row.value().size() != d) {
        throw IndexError("gather_rows: [mask] token without a mask row");
      }
      src = mask_row.value().data();
    } else if (tok >= 0 && static_cast<size_t>(tok) < rows) {
      src = tv.data() + static_cast<size_t>(tok) * d;
    } else {
      throw IndexError("item index " + std::to_string(tok) +
                       " out of range for table with " +
                       std::to_string(rows) + " rows");
    }
    std::copy(src, src + d, out.data() + r * d);
  }
  std::vector<int32_t> toks(tokens.begin(), tokens.end());
  const int ti = table.id();
  const int mi = mask_row.valid() ? mask_row.id() : -1;
  std::vector<Var> inputs{table};
  if (mask_row.valid()) inputs.push_back(mask_row);
  return t.Record(std::move(out), inputs,
                  [ti, mi, d, toks = std::move(toks)](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    for (size_t r = 0; r < toks.size(); ++r) {
                      const int32_t tok = toks[r];
                      double* dst = nullptr;
                      if (tok == kMaskToken) {
                        if (mi >= 0 && tp.requires_grad(mi)) {
                          dst = tp.grad(mi).data();
                        }
                      } else if (tok >= 0 && tp.requires_grad(ti)) {
                        dst = tp.grad(ti).data() + static_cast<size_t>(tok) * d;
                      }
                      if (!dst) continue;
                      for (size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
                    }
                  });
}

Var SliceRows(Var x, size_t begin, size_t count) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const size_t n = xv.cols();
  if (count == 0 || begin + count > xv.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", +" +
                         std::to_string(count) + ") out of " +
                         xv.ShapeString());
  }
  Tensor out = Tensor::Matrix(count, n);
  std::copy(xv.data() + begin * n, xv.data() + (begin + count) * n,
            out.data());
  const int xi = x.id();
  return t.Record(std::move(out), {x}, [xi, begin, count, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    double* gx = tp.grad(xi).data() + begin * n;
    for (size_t i = 0; i < count * n; ++i) gx[i] += g[i];
  });
}

Var SliceCols(Var x, size_t begin, size_t count) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const size_t m = xv.rows(), n = xv.cols();
  if (count == 0 || begin + count > n) {
    throw DimensionError("slice_cols out of range for " + xv.ShapeString());
  }
  Tensor out = Tensor::Matrix(m, count);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * n + begin + j];
  }
  const int xi = x.id();
  return t.Record(std::move(out), {x},
                  [xi, begin, count, m, n](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    Tensor& gx = tp.grad(xi);
                    for (size_t i = 0; i < m; ++i) {
                      for (size_t j = 0; j < count; ++j) {
                        gx[i * n + begin + j] += g[i * count + j];
                      }
                    }
                  });
}

Var ConcatRows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  Tape& t = *parts.front().tape();
  const size_t n = parts.front().value().cols();
  size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().cols() != n) {
      throw DimensionError("concat_rows: width mismatch " +
                           p.value().ShapeString());
    }
    total += p.value().rows();
  }
  Tensor out = Tensor::Matrix(total, n);
  std::vector<int> ids;
  std::vector<size_t> offsets;
  size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offset);
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += v.size();
  }
  return t.Record(std::move(out), parts,
                  [ids = std::move(ids), offsets = std::move(offsets)](
                      Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    for (size_t k = 0; k < ids.size(); ++k) {
                      if (!tp.requires_grad(ids[k])) continue;
                      Tensor& gp = tp.grad(ids[k]);
                      for (size_t i = 0; i < gp.size(); ++i) {
                        gp[i] += g[offsets[k] + i];
                      }
                    }
                  });
}

Var ConcatCols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  Tape& t = *parts.front().tape();
  const size_t m = parts.front().value().rows();
  size_t total = 0;
  for (const Var& p : parts) {
    if (p.value().rows() != m) {
      throw DimensionError("concat_cols: height mismatch " +
                           p.value().ShapeString());
    }
    total += p.value().cols();
  }
  Tensor out = Tensor::Matrix(m, total);
  std::vector<int> ids;
  std::vector<size_t> col_offsets;
  size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const size_t c = v.cols();
    for (size_t i = 0; i < m; ++i) {
      std::copy(v.data() + i * c, v.data() + (i + 1) * c,
                out.data() + i * total + offset);
    }
    ids.push_back(p.id());
    col_offsets.push_back(offset);
    offset += c;
  }
  return t.Record(std::move(out), parts,
                  [ids = std::move(ids), col_offsets = std::move(col_offsets),
                   m, total](Tape& tp, int self) {
                    const Tensor& g = tp.grad(self);
                    for (size_t k = 0; k < ids.size(); ++k) {
                      if (!tp.requires_grad(ids[k])) continue;
                      Tensor& gp = tp.grad(ids[k]);
                      const size_t c = gp.cols();
                      for (size_t i = 0; i < m; ++i) {
                        for (size_t j = 0; j < c; ++j) {
                          gp[i * c + j] += g[i * total + col_offsets[k] + j];
                        }
                      }
                    }
                  });
}

Var MeanRows(Var x) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  const size_t m = xv.rows(), n = xv.cols();
  Tensor out = Tensor::Matrix(1, n);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) out[j] += xv[i * n + j];
  }
  for (size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
  const int xi = x.id();
  return t.Record(std::move(out), {x}, [xi, m, n](Tape& tp, int self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(xi);
    const double inv = 1.0 / static_cast<double>(m);
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] * inv;
    }
  });
}

Var Sum(Var x) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.values()) s += v;
  const int xi = x.id();
  return t.Record(Tensor::Scalar(s), {x}, [xi](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    Tensor& gx = tp.grad(xi);
    for (double& v : gx.values()) v += g;
  });
}

Var SquaredDistance(Var a, Var b) {
  Tape& t = TapeOf({a, b});
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.size() != bv.size()) {
    throw DimensionError("squared_distance: " + av.ShapeString() + " vs " +
                         bv.ShapeString());
  }
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const int ai = a.id(), bi = b.id();
  return t.Record(Tensor::Scalar(s), {a, b}, [ai, bi](Tape& tp, int self) {
    const double g = tp.grad(self)[0];
    const Tensor& av = tp.value(ai);
    const Tensor& bv = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& ga = tp.grad(ai);
      for (size_t i = 0; i < av.size(); ++i) ga[i] += 2.0 * g * (av[i] - bv[i]);
    }
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad(bi);
      for (size_t i = 0; i < av.size(); ++i) gb[i] -= 2.0 * g * (av[i] - bv[i]);
    }
  });
}

Var SoftmaxCrossEntropy(Var logits, std::span<const int32_t> targets) {
  Tape& t = *logits.tape();
  const Tensor& lv = logits.value();
  const size_t m = lv.rows(), n = lv.cols();
  if (targets.size() != m) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(m) +
                         " rows but " + std::to_string(targets.size()) +
                         " targets");
  }
  auto probs = std::make_shared<std::vector<double>>(m * n);
  double loss = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const int32_t target = targets[i];
    if (target < 0 || static_cast<size_t>(target) >= n) {
      throw IndexError("target " + std::to_string(target) +
                       " outside vocabulary of " + std::to_string(n));
    }
    const double* row = lv.data() + i * n;
    double mx = row[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double e = std::exp(row[j] - mx);
      (*probs)[i * n + j] = e;
      total += e;
    }
    for (size_t j = 0; j < n; ++j) (*probs)[i * n + j] /= total;
    loss += std::log(total) + mx - row[target];
  }
  std::vector<int32_t> tgt(targets.begin(), targets.end());
  const int li = logits.id();
  return t.Record(Tensor::Scalar(loss), {logits},
                  [li, m, n, probs, tgt = std::move(tgt)](Tape& tp, int self) {
                    const double g = tp.grad(self)[0];
                    Tensor& gl = tp.grad(li);
                    for (size_t i = 0; i < m; ++i) {
                      for (size_t j = 0; j < n; ++j) {
                        gl[i * n + j] += g * (*probs)[i * n + j];
                      }
                      gl[i * n + static_cast<size_t>(tgt[i])] -= g;
                    }
                  });
}

}  // namespace seqrec::nn
