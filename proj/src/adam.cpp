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

#include "msvq/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace msvq {

AdamState make_adam_state(const ParamSet& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr) {
  for (const auto& [name, p] : params) {
    if (!grads.contains(name)) throw std::invalid_argument("missing gradient for " + name);
    require_same_dims(p, grads.at(name), name.c_str());
    grads.at(name).require_finite("gradient of " + name);
  }
  ++state.step;
  const double b1 = state.config.beta1;
  const double b2 = state.config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  const float gb1 = static_cast<float>(1.0 - b1), gb2 = static_cast<float>(1.0 - b2);
  const float inv_c1 = static_cast<float>(1.0 / correction1);
  const float inv_c2 = static_cast<float>(1.0 / correction2);
  const float rate = static_cast<float>(lr), eps = static_cast<float>(state.config.epsilon);
  for (auto& [name, p] : params) {
    const float* g = grads.at(name).raw();
    float* m = state.first_moment.at(name).raw();
    float* v = state.second_moment.at(name).raw();
    float* w = p.raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float gi = g[i];
      m[i] = fb1 * m[i] + gb1 * gi;
      v[i] = fb2 * v[i] + gb2 * gi * gi;
      w[i] -= rate * (m[i] * inv_c1) / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
    throw std::invalid_argument("decay_factor must lie in (0, 1]");
  }
  if (decay_every <= 0) throw std::invalid_argument("decay_every must be positive");
}

double lr_at(const LrSchedule& schedule, int epoch) {
  schedule.validate();
  if (epoch < 0) throw std::invalid_argument("negative epoch");
  return schedule.base_lr * std::pow(schedule.decay_factor, epoch / schedule.decay_every);
}

}  // namespace msvq
