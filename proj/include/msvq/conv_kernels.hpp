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

// Convolution kernels on batch-interleaved feature maps.
//
// Every array is laid out [C][H][W][N]: the N images of a batch are the
// fastest-moving axis, so one SIMD vector holds the same pixel of up to 16
// images. Weights keep the usual layouts (conv: out×in×k×k, transposed:
// in×out×k×k). Forward functions overwrite their output; backward functions
// accumulate into every non-empty gradient span and skip empty ones.

#ifndef MSVQ_CONV_KERNELS_HPP_
#define MSVQ_CONV_KERNELS_HPP_

#include <span>

namespace msvq::kernels {

struct ConvShape {
  int in_channels = 0;
  int height = 0;
  int width = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int batch = 1;

  int out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  int out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
  /// Throws ShapeError for non-positive extents or empty output.
  void validate() const;
};

struct TransposedShape {
  int in_channels = 0;
  int height = 0;
  int width = 0;
  int out_channels = 0;
  int kernel = 4;
  int stride = 2;
  int padding = 1;
  int batch = 1;

  int out_height() const { return (height - 1) * stride - 2 * padding + kernel; }
  int out_width() const { return (width - 1) * stride - 2 * padding + kernel; }
  void validate() const;
  /// The forward convolution whose input-gradient this layer computes.
  ConvShape adjoint() const;
};

void conv2d_forward(const ConvShape& s, std::span<const float> in, std::span<const float> weight,
                    std::span<const float> bias, std::span<float> out);

void conv2d_backward(const ConvShape& s, std::span<const float> in,
                     std::span<const float> weight, std::span<const float> d_out,
                     std::span<float> d_in, std::span<float> d_weight, std::span<float> d_bias);

void conv2d_transposed_forward(const TransposedShape& s, std::span<const float> in,
                               std::span<const float> weight, std::span<const float> bias,
                               std::span<float> out);

void conv2d_transposed_backward(const TransposedShape& s, std::span<const float> in,
                                std::span<const float> weight, std::span<const float> d_out,
                                std::span<float> d_in, std::span<float> d_weight,
                                std::span<float> d_bias);

}  // namespace msvq::kernels

#endif  // MSVQ_CONV_KERNELS_HPP_
