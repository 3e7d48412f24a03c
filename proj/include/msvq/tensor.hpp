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

#ifndef MSVQ_TENSOR_HPP_
#define MSVQ_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msvq {

/// Raised when tensor extents disagree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or Inf reaches a place that must stay finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed files (images, manifests, checkpoints, configs).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

std::string to_string(const Shape& dims);
std::size_t element_count(const Shape& dims);

/// Dense row-major float32 array. Images and feature maps are C×H×W.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, float fill = 0.0f);
  Tensor(Shape dims, std::vector<float> values);

  static Tensor scalar(float v) { return Tensor({1}, std::vector<float>{v}); }

  const Shape& dims() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // C×H×W accessors; caller guarantees rank 3.
  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }

  /// Reinterprets the data under new extents with the same element count.
  void reshape(Shape dims);

  void fill(float v);
  bool all_finite() const;
  /// Throws NumericError naming `what` if any element is NaN/Inf.
  void require_finite(const std::string& what) const;

  bool same_dims(const Tensor& other) const { return dims_ == other.dims_; }
  bool bit_equal(const Tensor& other) const;

 private:
  Shape dims_;
  std::vector<float> data_;
};

/// Throws ShapeError with `context` if the two tensors' dims differ.
void require_same_dims(const Tensor& a, const Tensor& b, const char* context);

/// Interleaves equally sized C×H×W images into one C×H×W×N batch.
Tensor stack_images(std::span<const Tensor> images);
/// Image `n` of a C×H×W×N batch as C×H×W.
Tensor unstack_image(const Tensor& batch, int n);

}  // namespace msvq

#endif  // MSVQ_TENSOR_HPP_
