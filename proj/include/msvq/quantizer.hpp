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

// Discrete latent bottleneck: codebook, nearest-code assignment, EMA
// codebook learning and usage statistics.
//
// The codebook and EMA types are templated on the scalar so that the update
// rule can be exercised in double precision; the model uses float. The
// templates below are instantiated for float and double only. Latents
// are D×H×W for one image or D×H×W×N for a batch, with one index map per
// image.

#ifndef MSVQ_QUANTIZER_HPP_
#define MSVQ_QUANTIZER_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msvq/graph.hpp"
#include "msvq/tensor.hpp"

namespace msvq {

template <typename T>
class BasicCodebook {
 public:
  BasicCodebook() = default;
  BasicCodebook(int size, int dim) : size_(size), dim_(dim) {
    if (size <= 0 || dim <= 0) throw std::invalid_argument("codebook extents must be positive");
    rows_.assign(static_cast<std::size_t>(size) * dim, T(0));
  }

  int size() const { return size_; }
  int dim() const { return dim_; }
  std::span<T> row(int k) { return {rows_.data() + offset(k), static_cast<std::size_t>(dim_)}; }
  std::span<const T> row(int k) const {
    return {rows_.data() + offset(k), static_cast<std::size_t>(dim_)};
  }
  std::span<T> data() { return rows_; }
  std::span<const T> data() const { return rows_; }

 private:
  std::size_t offset(int k) const {
    if (k < 0 || k >= size_) throw std::out_of_range("codebook index " + std::to_string(k));
    return static_cast<std::size_t>(k) * dim_;
  }

  int size_ = 0;
  int dim_ = 0;
  std::vector<T> rows_;
};

template <typename T>
struct BasicEmaState {
  std::vector<T> n_hat;  // K running counts
  std::vector<T> m_hat;  // K×D running sums
  double gamma = 0.99;
  double epsilon = 1e-5;
};

using Codebook = BasicCodebook<float>;
using EmaState = BasicEmaState<float>;

/// H'×W' grid of codebook indices.
struct LatentIndexMap {
  int height = 0;
  int width = 0;
  std::vector<int> indices;

  LatentIndexMap() = default;
  LatentIndexMap(int h, int w, int fill = 0)
      : height(h), width(w), indices(static_cast<std::size_t>(h) * w, fill) {}
  int& at(int y, int x) { return indices[static_cast<std::size_t>(y) * width + x]; }
  int at(int y, int x) const { return indices[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const LatentIndexMap&) const = default;
};

/// Lowest index among the codes at minimal squared Euclidean distance.
template <typename T>
int nearest_code(std::span<const T> z, const BasicCodebook<T>& codebook);

/// Per-code assignment counts and latent sums for one batch, in double.
struct BatchStats {
  int size = 0;
  int dim = 0;
  std::vector<double> counts;
  std::vector<double> sums;

  BatchStats(int k, int d)
      : size(k), dim(d), counts(static_cast<std::size_t>(k), 0.0),
        sums(static_cast<std::size_t>(k) * d, 0.0) {}

  void add(int code, std::span<const float> z);
  void add(int code, std::span<const double> z);
  /// Adds every cell of a latent with its assignment.
  void add(const Tensor& z_e, std::span<const LatentIndexMap> maps);
  void add(const Tensor& z_e, const LatentIndexMap& map) { add(z_e, {&map, 1}); }
  void merge(const BatchStats& other);
};

/// Codebook rows ~ N(0, 1/D) i.i.d.; m̂ = e and N̂ = 1.
template <typename T>
void init_codebook(BasicCodebook<T>& codebook, BasicEmaState<T>& state, std::uint64_t seed);

/// N̂ ← γN̂ + (1−γ)N;  m̂ ← γm̂ + (1−γ)m;  e ← m̂ / (N̂ + ε), for every code.
template <typename T>
void ema_update(BasicEmaState<T>& state, BasicCodebook<T>& codebook, const BatchStats& batch);

struct Quantized {
  Tensor values;  // same extents as the latent, every cell a codebook row
  std::vector<LatentIndexMap> maps;  // one per image
};

/// Assigns every cell of a latent to its nearest code.
Quantized quantize(const Tensor& z_e, const Codebook& codebook);
/// Rebuilds a D×H×W latent from one map, or D×H×W×N from N maps.
Tensor lookup(const LatentIndexMap& map, const Codebook& codebook);
Tensor lookup(std::span<const LatentIndexMap> maps, const Codebook& codebook);

/// Differentiable lookup of the rows of a K×D table (as a graph node)
/// selected by `maps`, giving D×H×W×N; gradient scatters back into the
/// table.
Var embedding_lookup(Var table, std::span<const LatentIndexMap> maps);
/// Copies a codebook into a K×D tensor and back.
Tensor codebook_tensor(const Codebook& codebook);
Codebook codebook_from_tensor(const Tensor& table);

struct UsageReport {
  double usage_fraction = 0.0;
  double perplexity = 1.0;
  std::vector<std::int64_t> counts;
};

/// Usage over a set of index maps; throws on an empty collection.
UsageReport codebook_stats(std::span<const LatentIndexMap> maps, int codebook_size);
UsageReport usage_from_counts(std::span<const std::int64_t> counts);

}  // namespace msvq

#endif  // MSVQ_QUANTIZER_HPP_
