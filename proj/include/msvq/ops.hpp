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

// Differentiable operations recorded on a Graph. Feature maps are batches
// laid out C×H×W×N (see conv_kernels.hpp); a single image is N = 1.

#ifndef MSVQ_OPS_HPP_
#define MSVQ_OPS_HPP_

#include <span>
#include <vector>

#include "msvq/graph.hpp"

namespace msvq {

enum class Activation { kRelu, kSigmoid, kLinear };

/// Cross-correlation with zero padding. Weight: out×in×k×k, bias: out (an
/// invalid Var means no bias).
Var conv2d(Var input, Var weight, Var bias, int stride, int padding);

/// Adjoint of a strided convolution. Weight: in×out×k×k. With the default
/// k=4, s=2, p=1 the output is exactly 2H×2W.
Var conv2d_transposed(Var input, Var weight, Var bias, int stride = 2, int padding = 1);

/// Stacks inputs along the channel axis in argument order.
Var concat_depth(std::span<const Var> inputs);
Var concat_depth(std::initializer_list<Var> inputs);

/// relu' at exactly 0 is 0.
Var activation(Var input, Activation kind);
inline Var relu(Var x) { return activation(x, Activation::kRelu); }
inline Var sigmoid(Var x) { return activation(x, Activation::kSigmoid); }

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Element-wise product.
Var mul(Var a, Var b);
Var scale(Var a, float factor);

/// Identity forward; blocks all gradient.
Var stop_gradient(Var x);

/// Forward value bit-equals `quantized`; gradient passes to `continuous`
/// unchanged and never reaches `quantized`, i.e. continuous + sg[quantized -
/// continuous] without the rounding of the explicit sum.
Var straight_through(Var continuous, Var quantized);

/// Scalar sum / mean of all elements (accumulated in double).
Var sum(Var x);
Var mean(Var x);
/// mean((a - b)^2) over all elements.
Var mse(Var a, Var b);

/// 2×2 max pooling with stride 2 (H and W must be even). Ties route the
/// gradient to the first maximum in scan order.
Var max_pool2(Var x);
/// C×H×W×N → C×N.
Var global_avg_pool(Var x);
/// Dense layer: weight M×K, input K×N, bias M; output M×N.
Var linear(Var input, Var weight, Var bias);
/// Mean binary cross-entropy of N logits against N targets, computed stably.
Var bce_with_logits(Var logits, std::span<const float> targets);

}  // namespace msvq

#endif  // MSVQ_OPS_HPP_
