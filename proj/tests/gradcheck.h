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

// Central finite-difference oracle for tape gradients. Test-only.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "seqrec/autodiff.h"

namespace seqrec::testing {

struct GradCheckResult {
  std::string worst_name;
  // Max over tensors of ||analytic - numeric|| / max(||analytic||, ||numeric||).
  double max_rel_error = 0.0;
  size_t checked_tensors = 0;
};

// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<nn::Var(nn::Tape&)>;

inline double RelativeError(const std::vector<double>& a,
                            const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  if (denom < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / denom;
}

// Compares d(loss)/d(p) for each p in params against central differences
// with step h. Parameters are perturbed in place and restored.
inline GradCheckResult CheckParameterGradients(
    const LossBuilder& build, const std::vector<nn::Parameter*>& params,
    double h = 1e-5) {
  nn::GradientBuffer analytic;
  {
    nn::Tape tape;
    nn::Var loss = build(tape);
    tape.Backward(loss);
    tape.AccumulateInto(analytic);
  }
  auto eval = [&]() {
    nn::Tape tape(false);
    return build(tape).value()[0];
  };
  GradCheckResult result;
  for (nn::Parameter* p : params) {
    std::vector<double> numeric(p->value.size());
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double up = eval();
      p->value[i] = orig - h;
      const double down = eval();
      p->value[i] = orig;
      numeric[i] = (up - down) / (2.0 * h);
    }
    std::vector<double> exact(p->value.size(), 0.0);
    if (const nn::Tensor* g = analytic.Find(*p)) {
      exact.assign(g->values().begin(), g->values().end());
    }
    const double err = RelativeError(exact, numeric);
    ++result.checked_tensors;
    if (err > result.max_rel_error || result.worst_name.empty()) {
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_name = p->name;
      }
    }
  }
  return result;
}

}  // namespace seqrec::testing
