// Copyright 2026 The MSVQ Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MSVQ_ADAM_HPP_
#define MSVQ_ADAM_HPP_

#include <cstdint>

#include "msvq/params.hpp"

namespace msvq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  ParamSet first_moment;
  ParamSet second_moment;
};

AdamState make_adam_state(const ParamSet& params, AdamConfig config = {});

/// One bias-corrected Adam update. Every parameter must have a same-shaped,
/// finite gradient in `grads` (std::invalid_argument / NumericError otherwise).
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr);

/// Staircase exponential decay: base_lr * decay_factor^floor(epoch / decay_every).
struct LrSchedule {
  double base_lr = 1e-3;
  double decay_factor = 0.9;
  int decay_every = 100;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, int epoch);

}  // namespace msvq

#endif  // MSVQ_ADAM_HPP_
