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

#include "msvq/reference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace msvq::reference {
namespace {

int kernel_of(std::size_t weight_size, int a, int b) {
  const auto k = static_cast<int>(std::lround(std::sqrt(double(weight_size) / (double(a) * b))));
  if (static_cast<std::size_t>(a) * b * k * k != weight_size) {
    throw ShapeError("reference: weight size does not factor as a square kernel");
  }
  return k;
}

const std::vector<double>& get(const Params& p, const std::string& name) {
  const auto it = p.find(name);
  if (it == p.end()) throw std::out_of_range("reference: missing parameter " + name);
  return it->second;
}

Map layer(const Params& p, const std::string& name, const Map& x, int stride, int padding) {
  return conv2d(x, get(p, name + ".weight"), get(p, name + ".bias"), stride, padding);
}

Map add(Map a, const Map& b) {
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
  return a;
}

std::string stage(const char* side, int s) { return std::string(side) + ".stage" + std::to_string(s); }

}  // namespace

Map conv2d(const Map& x, std::span<const double> weight, std::span<const double> bias,
           int stride, int padding) {
  const int out_c = static_cast<int>(bias.size());
  const int k = kernel_of(weight.size(), out_c, x.channels);
  const int oh = (x.height + 2 * padding - k) / stride + 1;
  const int ow = (x.width + 2 * padding - k) / stride + 1;
  Map y(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = bias[o];
        for (int c = 0; c < x.channels; ++c) {
          for (int u = 0; u < k; ++u) {
            const int yy = i * stride - padding + u;
            if (yy < 0 || yy >= x.height) continue;
            for (int v = 0; v < k; ++v) {
              const int xx = j * stride - padding + v;
              if (xx < 0 || xx >= x.width) continue;
              acc += weight[((std::size_t(o) * x.channels + c) * k + u) * k + v] * x.at(c, yy, xx);
            }
          }
        }
        y.at(o, i, j) = acc;
      }
    }
  }
  return y;
}

Map conv2d_transposed(const Map& x, std::span<const double> weight, std::span<const double> bias,
                      int stride, int padding) {
  const int out_c = static_cast<int>(bias.size());
  const int k = kernel_of(weight.size(), x.channels, out_c);
  const int oh = (x.height - 1) * stride - 2 * padding + k;
  const int ow = (x.width - 1) * stride - 2 * padding + k;
  Map y(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) y.at(o, i, j) = bias[o];
    }
  }
  // Scatter form: input (c, a, b) feeds output (a·s − p + u, b·s − p + v).
  for (int c = 0; c < x.channels; ++c) {
    for (int a = 0; a < x.height; ++a) {
      for (int b = 0; b < x.width; ++b) {
        for (int o = 0; o < out_c; ++o) {
          for (int u = 0; u < k; ++u) {
            const int i = a * stride - padding + u;
            if (i < 0 || i >= oh) continue;
            for (int v = 0; v < k; ++v) {
              const int j = b * stride - padding + v;
              if (j < 0 || j >= ow) continue;
              y.at(o, i, j) += weight[((std::size_t(c) * out_c + o) * k + u) * k + v] * x.at(c, a, b);
            }
          }
        }
      }
    }
  }
  return y;
}

Map relu(Map x, Trace* trace) {
  for (double& v : x.values) {
    if (trace) trace->decisions.push_back(v > 0.0);
    v = v > 0.0 ? v : 0.0;
  }
  return x;
}

Map sigmoid(Map x) {
  for (double& v : x.values) v = 1.0 / (1.0 + std::exp(-v));
  return x;
}

Map msb(const Params& p, const std::string& prefix, const Map& x, Trace* trace) {
  const Map b3 = relu(layer(p, prefix + ".branch3", x, 1, 1), trace);
  const Map b5 = relu(layer(p, prefix + ".branch5", x, 1, 2), trace);
  const Map b7 = relu(layer(p, prefix + ".branch7", x, 1, 3), trace);
  Map stacked(3 * x.channels, x.height, x.width);
  std::size_t n = 0;
  for (const Map* m : {&b3, &b5, &b7}) {
    for (double v : m->values) stacked.values[n++] = v;
  }
  const Map aggregated = relu(layer(p, prefix + ".aggregate", stacked, 1, 0), trace);
  return relu(layer(p, prefix + ".reduce", aggregated, 1, 1), trace);
}

Map residual_msb(const Params& p, const std::string& prefix, const Map& x, Trace* trace) {
  const Map features = msb(p, prefix + ".msb", x, trace);
  const Map skip = layer(p, prefix + ".skip", x, 1, 1);
  return relu(layer(p, prefix + ".fuse", add(features, skip), 1, 0), trace);
}

Map encode(const Params& p, const ModelConfig& config, const Map& image, Trace* trace) {
  Map h = relu(layer(p, "enc.stem", image, 1, 1), trace);
  for (int s = 1; s <= config.stages; ++s) {
    h = residual_msb(p, stage("enc", s), h, trace);
    h = relu(layer(p, stage("enc", s) + ".down", h, 2, 1), trace);
  }
  return layer(p, "enc.proj", h, 1, 0);
}

Map decode(const Params& p, const ModelConfig& config, const Map& latent, Trace* trace) {
  Map h = relu(layer(p, "dec.proj", latent, 1, 0), trace);
  for (int s = 1; s <= config.stages; ++s) {
    h = residual_msb(p, stage("dec", s), h, trace);
    const std::string up = stage("dec", s) + ".up";
    h = relu(conv2d_transposed(h, get(p, up + ".weight"), get(p, up + ".bias"), 2, 1), trace);
  }
  return sigmoid(layer(p, "dec.head", h, 1, 1));
}

Map quantize(const Map& latent, std::span<const double> codebook, Trace* trace) {
  const int dim = latent.channels;
  if (dim == 0 || codebook.size() % dim != 0) throw ShapeError("reference: codebook width");
  const auto codes = static_cast<int>(codebook.size() / dim);
  Map out(latent.channels, latent.height, latent.width);
  for (int y = 0; y < latent.height; ++y) {
    for (int x = 0; x < latent.width; ++x) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int k = 0; k < codes; ++k) {
        double dist = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double diff = latent.at(d, y, x) - codebook[std::size_t(k) * dim + d];
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = k;
        }
      }
      if (trace) trace->decisions.push_back(best);
      for (int d = 0; d < dim; ++d) out.at(d, y, x) = codebook[std::size_t(best) * dim + d];
    }
  }
  return out;
}

}  // namespace msvq::reference
