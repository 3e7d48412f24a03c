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

#include "msvq/msb.hpp"

#include <algorithm>

namespace msvq {
namespace {

constexpr int kBranchKernels[] = {3, 5, 7};

}  // namespace

void describe_conv(std::vector<ParamSpec>& specs, const std::string& name, int out_channels,
                   int in_channels, int kernel) {
  specs.push_back({name + ".weight", {out_channels, in_channels, kernel, kernel},
                   in_channels * kernel * kernel, false});
  specs.push_back({name + ".bias", {out_channels}, 1, true});
}

void describe_transposed_conv(std::vector<ParamSpec>& specs, const std::string& name,
                              int in_channels, int out_channels, int kernel, int stride) {
  // Each output pixel sees in·(k/s)² inputs.
  const int taps = std::max(1, (kernel / stride) * (kernel / stride));
  specs.push_back({name + ".weight", {in_channels, out_channels, kernel, kernel},
                   in_channels * taps, false});
  specs.push_back({name + ".bias", {out_channels}, 1, true});
}

Var conv_layer(ParamBinding& p, const std::string& name, Var x, int stride, int padding) {
  return conv2d(x, p(name + ".weight"), p(name + ".bias"), stride, padding);
}

void describe_msb(std::vector<ParamSpec>& specs, const std::string& prefix, int channels) {
  for (int k : kBranchKernels) {
    describe_conv(specs, prefix + ".branch" + std::to_string(k), channels, channels, k);
  }
  describe_conv(specs, prefix + ".aggregate", 3 * channels, 3 * channels, 1);
  describe_conv(specs, prefix + ".reduce", channels, 3 * channels, 3);
}

void describe_residual_msb(std::vector<ParamSpec>& specs, const std::string& prefix,
                           int channels) {
  describe_msb(specs, prefix + ".msb", channels);
  describe_conv(specs, prefix + ".skip", channels, channels, 3);
  describe_conv(specs, prefix + ".fuse", channels, channels, 1);
}

Var msb_forward(ParamBinding& p, const std::string& prefix, Var x) {
  const Var b3 = relu(conv_layer(p, prefix + ".branch3", x, 1, 1));
  const Var b5 = relu(conv_layer(p, prefix + ".branch5", x, 1, 2));
  const Var b7 = relu(conv_layer(p, prefix + ".branch7", x, 1, 3));
  const Var stacked = concat_depth({b3, b5, b7});
  const Var aggregated = relu(conv_layer(p, prefix + ".aggregate", stacked, 1, 0));
  return relu(conv_layer(p, prefix + ".reduce", aggregated, 1, 1));
}

Var residual_msb_forward(ParamBinding& p, const std::string& prefix, Var x) {
  const Var features = msb_forward(p, prefix + ".msb", x);
  const Var skip = conv_layer(p, prefix + ".skip", x, 1, 1);
  return relu(conv_layer(p, prefix + ".fuse", add(features, skip), 1, 0));
}

int residual_msb_radius() {
  // Widest branch (7×7 → 3) followed by the 3×3 reduction (→ 1); the skip
  // path reaches 1.
  return 3 + 1;
}

}  // namespace msvq
