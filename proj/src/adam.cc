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

#include "seqrec/adam.h"

#include <algorithm>
#include <cmath>

#include "seqrec/errors.h"

namespace seqrec::nn {

Adam::Adam(AdamConfig config, std::vector<Parameter*> params)
    : config_(config) {
  for (Parameter* p : params) {
    if (!p->frozen) params_.push_back(p);
  }
  for (Parameter* p : params_) {
    state_.first_moment.emplace_back(p->value.shape(), 0.0);
    state_.second_moment.emplace_back(p->value.shape(), 0.0);
  }
}

double Adam::ScheduledRate(int64_t step) const {
  if (config_.warmup_steps <= 0) return config_.peak_lr;
  const double ramp = static_cast<double>(step) /
                      static_cast<double>(config_.warmup_steps);
  return config_.peak_lr * std::min(ramp, 1.0);
}

void Adam::set_state(AdamState state) {
  if (state.first_moment.size() != params_.size() ||
      state.second_moment.size() != params_.size()) {
    throw DimensionError("adam state does not match parameter list");
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    if (!state.first_moment[i].SameShape(params_[i]->value) ||
        !state.second_moment[i].SameShape(params_[i]->value)) {
      throw DimensionError("adam moment shape mismatch for " +
                           params_[i]->name);
    }
  }
  state_ = std::move(state);
}

void Adam::Step(const GradientBuffer& grads) {
  for (Parameter* p : params_) {
    const Tensor* g = grads.Find(*p);
    if (g == nullptr) continue;
    if (!g->SameShape(p->value)) {
      throw DimensionError("gradient " + g->ShapeString() + " for parameter " +
                           p->name + " of shape " + p->value.ShapeString());
    }
    if (!g->AllFinite()) {
      throw NumericError("non-finite gradient for parameter " + p->name +
                         " at step " + std::to_string(state_.step));
    }
  }

  const double lr = ScheduledRate(state_.step);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double t = static_cast<double>(state_.step + 1);
  const double correction1 = 1.0 - std::pow(b1, t);
  const double correction2 = 1.0 - std::pow(b2, t);
  for (size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    const Tensor* g = grads.Find(p);
    Tensor& m = state_.first_moment[k];
    Tensor& v = state_.second_moment[k];
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double grad =
          (g ? (*g)[i] : 0.0) + config_.l2 * p.value[i];
      m[i] = b1 * m[i] + (1.0 - b1) * grad;
      v[i] = b2 * v[i] + (1.0 - b2) * grad * grad;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
  ++state_.step;
}

}  // namespace seqrec::nn
