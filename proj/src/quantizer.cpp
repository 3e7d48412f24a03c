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

#include "msvq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace msvq {
namespace {

template <typename T>
void add_cell(BatchStats& s, int code, std::span<const T> z) {
  if (code < 0 || code >= s.size) throw std::out_of_range("assignment outside codebook");
  if (static_cast<int>(z.size()) != s.dim) throw ShapeError("BatchStats: latent dim mismatch");
  s.counts[static_cast<std::size_t>(code)] += 1.0;
  double* m = s.sums.data() + static_cast<std::size_t>(code) * s.dim;
  for (int d = 0; d < s.dim; ++d) m[d] += static_cast<double>(z[d]);
}

// Cell q of a latent holds element d at d * cells + q, where q enumerates
// (y, x, n) with the image index fastest.
struct LatentGrid {
  int height, width, images;
  std::size_t cells() const { return static_cast<std::size_t>(height) * width * images; }
};

LatentGrid latent_grid(const Tensor& z, int dim, const char* what) {
  if ((z.rank() != 3 && z.rank() != 4) || z.dim(0) != dim) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(dim) +
                     "×H×W(×N) latent, got " + to_string(z.dims()));
  }
  return {z.dim(1), z.dim(2), z.rank() == 4 ? z.dim(3) : 1};
}

void check_maps(std::span<const LatentIndexMap> maps, int h, int w, int images, const char* what) {
  if (maps.empty()) throw ShapeError(std::string(what) + ": no index maps");
  if (static_cast<int>(maps.size()) != images) {
    throw ShapeError(std::string(what) + ": " + std::to_string(maps.size()) + " maps for " +
                     std::to_string(images) + " images");
  }
  for (const LatentIndexMap& m : maps) {
    if (m.height != h || m.width != w || m.indices.size() != static_cast<std::size_t>(h) * w) {
      throw ShapeError(std::string(what) + ": index map does not match the latent grid");
    }
  }
}

int assignment(std::span<const LatentIndexMap> maps, std::size_t q) {
  const std::size_t n = maps.size();
  return maps[q % n].indices[q / n];
}

Tensor gather_rows(std::span<const LatentIndexMap> maps, std::span<const float> table, int k_count,
                   int dim, bool batched) {
  const LatentIndexMap& first = maps.front();
  check_maps(maps, first.height, first.width, static_cast<int>(maps.size()), "lookup");
  Shape dims{dim, first.height, first.width};
  if (batched) dims.push_back(static_cast<int>(maps.size()));
  Tensor out(dims);
  const std::size_t cells = out.size() / static_cast<std::size_t>(dim);
  for (std::size_t q = 0; q < cells; ++q) {
    const int k = assignment(maps, q);
    if (k < 0 || k >= k_count) throw std::out_of_range("lookup: index outside codebook");
    const float* e = table.data() + static_cast<std::size_t>(k) * dim;
    for (int d = 0; d < dim; ++d) out[d * cells + q] = e[d];
  }
  return out;
}

}  // namespace

template <typename T>
int nearest_code(std::span<const T> z, const BasicCodebook<T>& codebook) {
  if (static_cast<int>(z.size()) != codebook.dim()) {
    throw ShapeError("nearest_code: vector dim " + std::to_string(z.size()) + " vs codebook dim " +
                     std::to_string(codebook.dim()));
  }
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int k = 0; k < codebook.size(); ++k) {
    const auto e = codebook.row(k);
    double dist = 0.0;
    for (std::size_t d = 0; d < z.size(); ++d) {
      const double diff = static_cast<double>(z[d]) - static_cast<double>(e[d]);
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

template <typename T>
void init_codebook(BasicCodebook<T>& codebook, BasicEmaState<T>& state, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(codebook.dim())));
  for (T& v : codebook.data()) v = static_cast<T>(dist(rng));
  state.n_hat.assign(static_cast<std::size_t>(codebook.size()), T(1));
  state.m_hat.assign(codebook.data().begin(), codebook.data().end());
}

template <typename T>
void ema_update(BasicEmaState<T>& state, BasicCodebook<T>& codebook, const BatchStats& batch) {
  const int k_count = codebook.size();
  const int dim = codebook.dim();
  if (batch.size != k_count || batch.dim != dim ||
      state.n_hat.size() != static_cast<std::size_t>(k_count) ||
      state.m_hat.size() != static_cast<std::size_t>(k_count) * dim) {
    throw ShapeError("ema_update: statistics do not match the codebook");
  }
  if (!(state.gamma >= 0.0 && state.gamma < 1.0) || !(state.epsilon > 0.0)) {
    throw std::invalid_argument("ema_update: need 0 <= gamma < 1 and epsilon > 0");
  }
  const double g = state.gamma;
  for (int k = 0; k < k_count; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double n = g * static_cast<double>(state.n_hat[kk]) + (1.0 - g) * batch.counts[kk];
    state.n_hat[kk] = static_cast<T>(n);
    const double denom = n + state.epsilon;
    auto e = codebook.row(k);
    for (int d = 0; d < dim; ++d) {
      const std::size_t i = kk * dim + d;
      const double m = g * static_cast<double>(state.m_hat[i]) + (1.0 - g) * batch.sums[i];
      state.m_hat[i] = static_cast<T>(m);
      e[d] = static_cast<T>(m / denom);
    }
  }
}

template int nearest_code<float>(std::span<const float>, const BasicCodebook<float>&);
template int nearest_code<double>(std::span<const double>, const BasicCodebook<double>&);
template void init_codebook<float>(BasicCodebook<float>&, BasicEmaState<float>&, std::uint64_t);
template void init_codebook<double>(BasicCodebook<double>&, BasicEmaState<double>&, std::uint64_t);
template void ema_update<float>(BasicEmaState<float>&, BasicCodebook<float>&, const BatchStats&);
template void ema_update<double>(BasicEmaState<double>&, BasicCodebook<double>&, const BatchStats&);

void BatchStats::add(int code, std::span<const float> z) { add_cell(*this, code, z); }
void BatchStats::add(int code, std::span<const double> z) { add_cell(*this, code, z); }

void BatchStats::add(const Tensor& z_e, std::span<const LatentIndexMap> maps) {
  const LatentGrid grid = latent_grid(z_e, dim, "BatchStats");
  check_maps(maps, grid.height, grid.width, grid.images, "BatchStats");
  const std::size_t cells = grid.cells();
  std::vector<float> cell(static_cast<std::size_t>(dim));
  for (std::size_t q = 0; q < cells; ++q) {
    for (int d = 0; d < dim; ++d) cell[d] = z_e[static_cast<std::size_t>(d) * cells + q];
    add(assignment(maps, q), std::span<const float>(cell));
  }
}

void BatchStats::merge(const BatchStats& other) {
  if (other.size != size || other.dim != dim) throw ShapeError("BatchStats: merge mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += other.sums[i];
}

Quantized quantize(const Tensor& z_e, const Codebook& codebook) {
  const LatentGrid grid = latent_grid(z_e, codebook.dim(), "quantize");
  const std::size_t cells = grid.cells();
  const auto images = static_cast<std::size_t>(grid.images);
  Quantized out{Tensor(z_e.dims()),
                std::vector<LatentIndexMap>(images, LatentIndexMap(grid.height, grid.width))};
  std::vector<float> cell(static_cast<std::size_t>(codebook.dim()));
  for (std::size_t q = 0; q < cells; ++q) {
    for (int d = 0; d < codebook.dim(); ++d) cell[d] = z_e[d * cells + q];
    const int k = nearest_code(std::span<const float>(cell), codebook);
    out.maps[q % images].indices[q / images] = k;
    const auto e = codebook.row(k);
    for (int d = 0; d < codebook.dim(); ++d) out.values[d * cells + q] = e[d];
  }
  return out;
}

Tensor lookup(const LatentIndexMap& map, const Codebook& codebook) {
  return gather_rows({&map, 1}, codebook.data(), codebook.size(), codebook.dim(), false);
}

Tensor lookup(std::span<const LatentIndexMap> maps, const Codebook& codebook) {
  if (maps.empty()) throw ShapeError("lookup: no index maps");
  return gather_rows(maps, codebook.data(), codebook.size(), codebook.dim(), true);
}

Var embedding_lookup(Var table, std::span<const LatentIndexMap> maps) {
  Graph& g = table.graph();
  const Tensor& t = table.value();
  if (t.rank() != 2) throw ShapeError("embedding_lookup: table must be K×D");
  if (maps.empty()) throw ShapeError("embedding_lookup: no index maps");
  const int dim = t.dim(1);
  Tensor out = gather_rows(maps, t.data(), t.dim(0), dim, true);
  const std::size_t cells = out.size() / static_cast<std::size_t>(dim);
  const int ti = table.id();
  std::vector<LatentIndexMap> owned(maps.begin(), maps.end());
  return g.record(std::move(out), {table},
                  [ti, owned = std::move(owned), dim, cells](Graph& gr, int self) {
                    if (!gr.requires_grad(ti)) return;
                    const Tensor& d_out = *gr.incoming_grad(self);
                    Tensor& d = gr.grad_buffer(ti);
                    for (std::size_t q = 0; q < cells; ++q) {
                      const std::size_t row = static_cast<std::size_t>(assignment(owned, q)) * dim;
                      for (int k = 0; k < dim; ++k) d[row + k] += d_out[k * cells + q];
                    }
                  });
}

Tensor codebook_tensor(const Codebook& codebook) {
  const auto d = codebook.data();
  return Tensor({codebook.size(), codebook.dim()}, std::vector<float>(d.begin(), d.end()));
}

Codebook codebook_from_tensor(const Tensor& table) {
  if (table.rank() != 2) throw ShapeError("codebook tensor must be K×D");
  Codebook c(table.dim(0), table.dim(1));
  std::copy(table.data().begin(), table.data().end(), c.data().begin());
  return c;
}

UsageReport usage_from_counts(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("usage: empty codebook");
  std::int64_t total = 0;
  std::size_t used = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw std::invalid_argument("usage: negative count");
    total += c;
    used += c > 0 ? 1 : 0;
  }
  if (total == 0) throw std::invalid_argument("usage: no assignments");
  double entropy = 0.0;
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(total);
    entropy -= p * std::log(p);
  }
  UsageReport r;
  r.usage_fraction = static_cast<double>(used) / static_cast<double>(counts.size());
  r.perplexity = std::exp(entropy);
  r.counts.assign(counts.begin(), counts.end());
  return r;
}

UsageReport codebook_stats(std::span<const LatentIndexMap> maps, int codebook_size) {
  if (maps.empty()) throw std::invalid_argument("codebook_stats: no index maps");
  if (codebook_size <= 0) throw std::invalid_argument("codebook_stats: codebook size must be positive");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(codebook_size), 0);
  for (const LatentIndexMap& m : maps) {
    for (int k : m.indices) {
      if (k < 0 || k >= codebook_size) throw std::out_of_range("codebook_stats: index outside codebook");
      ++counts[static_cast<std::size_t>(k)];
    }
  }
  return usage_from_counts(counts);
}

}  // namespace msvq
