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

// Straightforward double-precision forward passes of the layers and the
// model, one image at a time. They share no code with the kernels and exist
// to be differentiated numerically.

#ifndef MSVQ_REFERENCE_HPP_
#define MSVQ_REFERENCE_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "msvq/model.hpp"

namespace msvq::reference {

/// C×H×W feature map.
struct Map {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Map() = default;
  Map(int c, int h, int w) : channels(c), height(h), width(w), values(std::size_t(c) * h * w) {}
  double& at(int c, int y, int x) { return values[(std::size_t(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const {
    return values[(std::size_t(c) * height + y) * width + x];
  }
};

/// Records every branch taken (ReLU signs, code assignments) so that two
/// evaluations can be compared for a change of linear piece.
struct Trace {
  std::vector<int> decisions;
};

using Params = std::map<std::string, std::vector<double>>;

/// Weight out×in×k×k, k inferred from the sizes.
Map conv2d(const Map& x, std::span<const double> weight, std::span<const double> bias,
           int stride, int padding);
/// Weight in×out×k×k.
Map conv2d_transposed(const Map& x, std::span<const double> weight, std::span<const double> bias,
                      int stride, int padding);
Map relu(Map x, Trace* trace);
Map sigmoid(Map x);

Map msb(const Params& p, const std::string& prefix, const Map& x, Trace* trace);
Map residual_msb(const Params& p, const std::string& prefix, const Map& x, Trace* trace);

Map encode(const Params& p, const ModelConfig& config, const Map& image, Trace* trace);
Map decode(const Params& p, const ModelConfig& config, const Map& latent, Trace* trace);
/// Replaces every cell by its nearest row of the K×D `codebook` (lowest index
/// on ties).
Map quantize(const Map& latent, std::span<const double> codebook, Trace* trace);

}  // namespace msvq::reference

#endif  // MSVQ_REFERENCE_HPP_
