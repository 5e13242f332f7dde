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

#include "seqrec/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "seqrec/errors.h"

namespace seqrec::nn {

namespace {

size_t Product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1},
                         std::multiplies<size_t>());
}

void CheckShape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
  for (size_t d : shape) {
    if (d == 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           ShapeString(shape));
    }
  }
}

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::string out = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  CheckShape(shape_);
  values_.assign(Product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  CheckShape(shape_);
  if (values_.size() != Product(shape_)) {
    throw DimensionError("tensor of shape " + nn::ShapeString(shape_) +
                         " given " + std::to_string(values_.size()) +
                         " values");
  }
}

Tensor Tensor::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const size_t r = rows.size();
  const size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in FromRows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::Vector(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return values_.size() / shape_.back();
}

void Tensor::Fill(double v) { std::fill(values_.begin(), values_.end(), v); }

void Tensor::AddInPlace(const Tensor& other) {
  if (!SameShape(other)) {
    throw DimensionError("cannot add " + other.ShapeString() + " into " +
                         ShapeString());
  }
  for (size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool Tensor::BitwiseEqual(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(),
                      values_.size() * sizeof(double)) == 0);
}

}  // namespace seqrec::nn
