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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqrec::nn {

using Shape = std::vector<size_t>;

std::string ShapeString(const Shape& shape);

// Dense row-major array of doubles. Every operation in the library treats a
// tensor as a matrix of rows() x cols(), where cols() is the last dimension
// and rows() the product of the leading ones.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor Matrix(size_t rows, size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor FromRows(
      std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Vector(std::initializer_list<double> values);
  static Tensor Scalar(double value) { return Tensor({1}, {value}); }

  bool empty() const { return values_.empty(); }
  const Shape& shape() const { return shape_; }
  size_t size() const { return values_.size(); }
  size_t rows() const;
  size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](size_t i) { return values_[i]; }
  double operator[](size_t i) const { return values_[i]; }
  double& at(size_t r, size_t c) { return values_[r * cols() + c]; }
  double at(size_t r, size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(size_t r) {
    return std::span<double>(values_).subspan(r * cols(), cols());
  }
  std::span<const double> row(size_t r) const {
    return std::span<const double>(values_).subspan(r * cols(), cols());
  }

  void Fill(double v);
  // this += other (same shape).
  void AddInPlace(const Tensor& other);
  bool AllFinite() const;
  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  // Compares shape and the raw bit patterns of every value.
  bool BitwiseEqual(const Tensor& other) const;
  std::string ShapeString() const { return nn::ShapeString(shape_); }

 private:
  Shape shape_;
  std::vector<double> values_;
};

}  // namespace seqrec::nn
