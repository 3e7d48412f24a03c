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

// Multiscale feature block and its residual wrapper.
//
// Parameter names, relative to a block prefix P:
//
//   P.msb.branch3  C→C, 3×3     P.msb.aggregate  3C→3C, 1×1
//   P.msb.branch5  C→C, 5×5     P.msb.reduce     3C→C,  3×3
//   P.msb.branch7  C→C, 7×7
//   P.skip         C→C, 3×3 (residual wrapper only, linear)
//   P.fuse         C→C, 1×1 (residual wrapper only)
//
// each with ".weight" and ".bias". All convolutions are stride 1 with same
// padding, so neither block changes C×H×W.

#ifndef MSVQ_MSB_HPP_
#define MSVQ_MSB_HPP_

#include <string>
#include <vector>

#include "msvq/ops.hpp"
#include "msvq/params.hpp"

namespace msvq {

/// Appends `name.weight` (out×in×k×k) and `name.bias` (out).
void describe_conv(std::vector<ParamSpec>& specs, const std::string& name, int out_channels,
                   int in_channels, int kernel);
/// Appends `name.weight` (in×out×k×k) and `name.bias` for a transposed conv.
void describe_transposed_conv(std::vector<ParamSpec>& specs, const std::string& name,
                              int in_channels, int out_channels, int kernel, int stride);

/// conv2d with `name.weight` / `name.bias` from the binding.
Var conv_layer(ParamBinding& p, const std::string& name, Var x, int stride, int padding);

void describe_msb(std::vector<ParamSpec>& specs, const std::string& prefix, int channels);
void describe_residual_msb(std::vector<ParamSpec>& specs, const std::string& prefix,
                           int channels);

/// relu(reduce(relu(aggregate(concat(relu(b3 x), relu(b5 x), relu(b7 x))))))
/// `prefix` is the ".msb" level, e.g. "enc.stage1.msb".
Var msb_forward(ParamBinding& p, const std::string& prefix, Var x);

/// relu(fuse(msb(x) + skip(x))). `prefix` is the block level, e.g.
/// "enc.stage1".
Var residual_msb_forward(ParamBinding& p, const std::string& prefix, Var x);

/// Largest spatial reach (in pixels, per side) of one residual block.
int residual_msb_radius();

}  // namespace msvq

#endif  // MSVQ_MSB_HPP_
