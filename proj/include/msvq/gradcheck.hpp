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

#ifndef MSVQ_GRADCHECK_HPP_
#define MSVQ_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "msvq/graph.hpp"

namespace msvq {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose step changed linear piece
};

/// Builds a scalar loss from `param` on `graph`. Must be deterministic.
using LossBuilder = std::function<Var(Graph& graph, Var param)>;

/// Compares autodiff gradients of `loss` w.r.t. `params` against central
/// differences (f(p+eps) - f(p-eps)) / (2 eps), returning the maximum of
/// |ad - fd| / max(1, |fd|).
///
/// The step actually taken after float rounding of p±eps is used as the
/// denominator. When `max_coords` is non-zero and smaller than the tensor,
/// a seeded random subset of that many coordinates is checked.
GradCheckReport finite_diff_check(const LossBuilder& loss, const Tensor& params, double eps,
                                  std::size_t max_coords = 0, std::uint64_t seed = 0);

/// Value of a double-precision reference function together with the
/// branches it took (ReLU signs, code assignments).
struct PiecewiseValue {
  double value = 0.0;
  std::vector<int> piece;
};
using ReferenceFn = std::function<PiecewiseValue(std::span<const double> point)>;

/// Compares `analytic`, a gradient at `point`, against central differences of
/// an independent double-precision `reference`, with the same error measure
/// as finite_diff_check. Coordinates whose ±eps evaluations leave the linear
/// piece of the centre are skipped and replaced by further coordinates, until
/// `max_coords` (0 = all) have been checked.
GradCheckReport reference_check(std::span<const float> analytic, const ReferenceFn& reference,
                                std::span<const double> point, double eps,
                                std::size_t max_coords = 0, std::uint64_t seed = 0);

}  // namespace msvq

#endif  // MSVQ_GRADCHECK_HPP_
