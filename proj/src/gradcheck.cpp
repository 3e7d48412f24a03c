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

#include "msvq/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace msvq {
namespace {

double evaluate(const LossBuilder& loss, const Tensor& params) {
  Graph g(GradMode::kInference);
  const Var p = g.constant(params);
  const Var l = loss(g, p);
  if (l.value().size() != 1) throw ShapeError("gradient check: loss is not a scalar");
  return l.value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const LossBuilder& loss, const Tensor& params, double eps,
                                  std::size_t max_coords, std::uint64_t seed) {
  Graph g;
  const Var p = g.parameter(params);
  const Var l = loss(g, p);
  g.backward(l);
  const Tensor analytic = g.grad(p);

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (max_coords != 0 && max_coords < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  Tensor probe = params;
  for (std::size_t i : coords) {
    const float original = params[i];
    const float up = static_cast<float>(original + eps);
    const float down = static_cast<float>(original - eps);
    probe[i] = up;
    const double f_up = evaluate(loss, probe);
    probe[i] = down;
    const double f_down = evaluate(loss, probe);
    probe[i] = original;

    const double numeric = (f_up - f_down) / (static_cast<double>(up) - down);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (report.checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
    ++report.checked;
  }
  return report;
}

GradCheckReport reference_check(std::span<const float> analytic, const ReferenceFn& reference,
                                std::span<const double> point, double eps,
                                std::size_t max_coords, std::uint64_t seed) {
  if (analytic.size() != point.size()) {
    throw ShapeError("reference_check: gradient and point differ in length");
  }
  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  const std::size_t wanted = max_coords == 0 ? coords.size() : std::min(max_coords, coords.size());

  const std::vector<int> centre = reference(point).piece;
  std::vector<double> probe(point.begin(), point.end());
  GradCheckReport report;
  for (std::size_t i : coords) {
    if (report.checked == wanted) break;
    probe[i] = point[i] + eps;
    const PiecewiseValue up = reference(probe);
    probe[i] = point[i] - eps;
    const PiecewiseValue down = reference(probe);
    probe[i] = point[i];
    if (up.piece != centre || down.piece != centre) {
      ++report.skipped;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (report.checked == 0 || err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace msvq
