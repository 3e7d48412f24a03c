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

#include "msvq/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace msvq {

std::string to_string(const Shape& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  return os.str();
}

std::size_t element_count(const Shape& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + to_string(dims));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)) {
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<float> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("shape " + to_string(dims_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

void Tensor::reshape(Shape dims) {
  if (element_count(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(dims_) + " to " + to_string(dims));
  }
  dims_ = std::move(dims);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + what);
}

bool Tensor::bit_equal(const Tensor& other) const {
  return dims_ == other.dims_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* context) {
  if (!a.same_dims(b)) {
    throw ShapeError(std::string(context) + ": dims " + to_string(a.dims()) + " vs " +
                     to_string(b.dims()));
  }
}

Tensor stack_images(std::span<const Tensor> images) {
  if (images.empty()) throw ShapeError("stack_images: no images");
  const Tensor& first = images.front();
  if (first.rank() != 3) throw ShapeError("stack_images: expected C×H×W, got " + to_string(first.dims()));
  const std::size_t n = images.size();
  Tensor out({first.dim(0), first.dim(1), first.dim(2), static_cast<int>(n)});
  for (std::size_t b = 0; b < n; ++b) {
    require_same_dims(first, images[b], "stack_images");
    const Tensor& img = images[b];
    for (std::size_t i = 0; i < img.size(); ++i) out[i * n + b] = img[i];
  }
  return out;
}

Tensor unstack_image(const Tensor& batch, int n) {
  if (batch.rank() != 4) throw ShapeError("unstack_image: expected C×H×W×N, got " + to_string(batch.dims()));
  if (n < 0 || n >= batch.dim(3)) throw std::out_of_range("unstack_image: index " + std::to_string(n));
  const std::size_t count = static_cast<std::size_t>(batch.dim(3));
  Tensor out({batch.dim(0), batch.dim(1), batch.dim(2)});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch[i * count + static_cast<std::size_t>(n)];
  return out;
}

}  // namespace msvq
