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

#include <cstdint>
#include <vector>

#include "seqrec/autodiff.h"

namespace seqrec::nn {

struct AdamConfig {
  double peak_lr = 1e-3;
  // Linear ramp from 0 to peak_lr over this many steps, then constant.
  // Zero disables the ramp.
  int64_t warmup_steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Added to the gradient as l2 * param before the moment updates.
  double l2 = 0.0;
};

struct AdamState {
  int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

class Adam {
 public:
  // Frozen parameters in `params` are skipped.
  Adam(AdamConfig config, std::vector<Parameter*> params);

  // Effective learning rate for the next Step().
  double LearningRate() const { return ScheduledRate(state_.step); }
  double ScheduledRate(int64_t step) const;

  // One update. Throws NumericError (and leaves params and state untouched)
  // if any gradient is NaN or infinite.
  void Step(const GradientBuffer& grads);

  const AdamConfig& config() const { return config_; }
  const AdamState& state() const { return state_; }
  void set_state(AdamState state);
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  AdamConfig config_;
  std::vector<Parameter*> params_;
  AdamState state_;
};

}  // namespace seqrec::nn
