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

#include "msvq/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "msvq/msb.hpp"
#include "msvq/ops.hpp"

namespace msvq {
namespace {

std::string stage_name(const char* side, int s) {
  return std::string(side) + ".stage" + std::to_string(s);
}

void require_input(const ModelConfig& c, const Tensor& images) {
  if (images.rank() != 4 || images.dim(0) != c.in_channels || images.dim(1) != c.image_size ||
      images.dim(2) != c.image_size) {
    throw ShapeError("encode: expected images " + std::to_string(c.in_channels) + "x" +
                     std::to_string(c.image_size) + "x" + std::to_string(c.image_size) +
                     "xN, got " + to_string(images.dims()));
  }
}

void require_latent(const ModelConfig& c, const Tensor& z) {
  if (z.rank() != 4 || z.dim(0) != c.embedding_dim || z.dim(1) != c.latent_size() ||
      z.dim(2) != c.latent_size()) {
    throw ShapeError("decode: expected latent " + std::to_string(c.embedding_dim) + "x" +
                     std::to_string(c.latent_size()) + "x" + std::to_string(c.latent_size()) +
                     "xN, got " + to_string(z.dims()));
  }
}

// Runs `fn` on a rank-4 view of a single C×H×W tensor (N = 1) or on a batch
// as is, restoring the caller's rank on the result.
template <typename Fn>
Tensor as_batch(const Tensor& t, Fn fn) {
  if (t.rank() == 4) return fn(t);
  if (t.rank() != 3) throw ShapeError("expected C×H×W or C×H×W×N, got " + to_string(t.dims()));
  Tensor one = t;
  one.reshape({t.dim(0), t.dim(1), t.dim(2), 1});
  Tensor out = fn(one);
  out.reshape({out.dim(0), out.dim(1), out.dim(2)});
  return out;
}

}  // namespace

ModelConfig ModelConfig::paper_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.image_size = 32;
  c.base_channels = 8;
  c.stages = 3;
  c.codebook_size = 32;
  c.embedding_dim = 16;
  return c;
}

void ModelConfig::validate() const {
  if (in_channels != 3) throw std::invalid_argument("in_channels must be 3 (RGB)");
  if (stages <= 0 || stages > 10) throw std::invalid_argument("stages must lie in [1, 10]");
  if (base_channels <= 0) throw std::invalid_argument("base_channels must be positive");
  if (image_size <= 0 || image_size % (1 << stages) != 0) {
    throw std::invalid_argument("image_size must be a positive multiple of 2^stages");
  }
  if (codebook_size <= 0) throw std::invalid_argument("codebook size K must be positive");
  if (embedding_dim <= 0) throw std::invalid_argument("embedding dim D must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

std::vector<ParamSpec> describe_model(const ModelConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  describe_conv(specs, "enc.stem", c.base_channels, c.in_channels, 3);
  int width = c.base_channels;
  for (int s = 1; s <= c.stages; ++s) {
    describe_residual_msb(specs, stage_name("enc", s), width);
    describe_conv(specs, stage_name("enc", s) + ".down", 2 * width, width, 3);
    width *= 2;
  }
  describe_conv(specs, "enc.proj", c.embedding_dim, width, 1);
  describe_conv(specs, "dec.proj", width, c.embedding_dim, 1);
  for (int s = 1; s <= c.stages; ++s) {
    describe_residual_msb(specs, stage_name("dec", s), width);
    describe_transposed_conv(specs, stage_name("dec", s) + ".up", width, width / 2, 4, 2);
    width /= 2;
  }
  describe_conv(specs, "dec.head", c.in_channels, width, 3);
  return specs;
}

Model make_model(const ModelConfig& config, std::uint64_t seed) {
  Model m;
  m.config = config;
  const auto specs = describe_model(config);
  m.params = init_params(specs, seed);
  m.codebook = Codebook(config.codebook_size, config.embedding_dim);
  m.ema.gamma = config.gamma;
  m.ema.epsilon = config.epsilon;
  init_codebook(m.codebook, m.ema, seed ^ 0x9e3779b97f4a7c15ull);
  return m;
}

Var encode(ParamBinding& p, const ModelConfig& c, Var image) {
  require_input(c, image.value());
  Var h = relu(conv_layer(p, "enc.stem", image, 1, 1));
  for (int s = 1; s <= c.stages; ++s) {
    const std::string name = stage_name("enc", s);
    h = residual_msb_forward(p, name, h);
    h = relu(conv_layer(p, name + ".down", h, 2, 1));
  }
  return conv_layer(p, "enc.proj", h, 1, 0);
}

Var decode(ParamBinding& p, const ModelConfig& c, Var latent) {
  require_latent(c, latent.value());
  Var h = relu(conv_layer(p, "dec.proj", latent, 1, 0));
  for (int s = 1; s <= c.stages; ++s) {
    const std::string name = stage_name("dec", s);
    h = residual_msb_forward(p, name, h);
    h = relu(conv2d_transposed(h, p(name + ".up.weight"), p(name + ".up.bias"), 2, 1));
  }
  return sigmoid(conv_layer(p, "dec.head", h, 1, 1));
}

std::vector<SpatialLayer> decoder_spatial_layers(const ModelConfig& c) {
  const int r = residual_msb_radius();
  std::vector<SpatialLayer> layers{{1, 1, 0, false}};
  for (int s = 1; s <= c.stages; ++s) {
    layers.push_back({2 * r + 1, 1, r, false});
    layers.push_back({4, 2, 1, true});
  }
  layers.push_back({3, 1, 1, false});
  return layers;
}

Tensor encode(const Model& model, const Tensor& images) {
  return as_batch(images, [&](const Tensor& x) {
    Graph g(GradMode::kInference);
    ParamBinding p(g, model.params);
    return encode(p, model.config, g.constant(x)).value();
  });
}

Tensor decode(const Model& model, const Tensor& latent) {
  return as_batch(latent, [&](const Tensor& z) {
    Graph g(GradMode::kInference);
    ParamBinding p(g, model.params);
    return decode(p, model.config, g.constant(z)).value();
  });
}

Tensor reconstruct(const Model& model, const Tensor& images) {
  return as_batch(images, [&](const Tensor& x) {
    return decode(model, quantize(encode(model, x), model.codebook).values);
  });
}

LatentIndexMap encode_indices(const Model& model, const Tensor& image) {
  return quantize(encode(model, image), model.codebook).maps.front();
}

std::vector<LatentIndexMap> encode_indices(const Model& model, std::span<const Tensor> images) {
  std::vector<LatentIndexMap> maps;
  maps.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += kMicroBatch) {
    const auto chunk = images.subspan(i, std::min(kMicroBatch, images.size() - i));
    Quantized q = quantize(encode(model, stack_images(chunk)), model.codebook);
    for (LatentIndexMap& m : q.maps) maps.push_back(std::move(m));
  }
  return maps;
}

Tensor decode_indices(const Model& model, const LatentIndexMap& map) {
  return decode(model, lookup(map, model.codebook));
}

std::vector<Tensor> decode_indices(const Model& model, std::span<const LatentIndexMap> maps) {
  std::vector<Tensor> images;
  images.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); i += kMicroBatch) {
    const auto chunk = maps.subspan(i, std::min(kMicroBatch, maps.size() - i));
    const Tensor batch = decode(model, lookup(chunk, model.codebook));
    for (int n = 0; n < batch.dim(3); ++n) images.push_back(unstack_image(batch, n));
  }
  return images;
}

double reconstruction_loss(const Tensor& x, const Tensor& x_hat) {
  require_same_dims(x, x_hat, "reconstruction_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - x_hat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double total_loss(double l_rec, const Tensor& z_e, const Tensor& z_q, double beta) {
  return l_rec + beta * reconstruction_loss(z_e, z_q);
}

double loss_identity_error(const LossReport& r, double beta) {
  const double expected = r.l_rec + beta * r.l_commit;
  const double scale = std::max(std::abs(expected), 1e-30);
  return std::abs(r.l_total - expected) / scale;
}

LossReport forward_train(Model& model, std::span<const Tensor> batch, ParamSet& grads) {
  if (batch.empty()) throw std::invalid_argument("forward_train: empty batch");
  const ModelConfig& c = model.config;
  grads.fill(0.0f);
  const Tensor table = codebook_tensor(model.codebook);
  Tensor table_grad(table.dims(), 0.0f);
  BatchStats stats(c.codebook_size, c.embedding_dim);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(c.codebook_size), 0);
  const double total_images = static_cast<double>(batch.size());

  LossReport r;
  for (std::size_t i = 0; i < batch.size(); i += kMicroBatch) {
    const auto chunk = batch.subspan(i, std::min(kMicroBatch, batch.size() - i));
    const double weight = static_cast<double>(chunk.size()) / total_images;
    Graph g;
    ParamBinding p(g, model.params, &grads);
    const Var x = g.constant(stack_images(chunk));
    const Var z_e = encode(p, c, x);
    const Quantized q = quantize(z_e.value(), model.codebook);
    // The codebook enters the graph as a parameter so the absence of a loss
    // gradient is observable rather than assumed.
    const Var z_q = embedding_lookup(g.parameter_ref(table, &table_grad), q.maps);
    const Var x_hat = decode(p, c, straight_through(z_e, z_q));
    const Var l_rec = mse(x, x_hat);
    const Var l_commit = mse(z_e, stop_gradient(z_q));
    const Var total = add(l_rec, scale(l_commit, static_cast<float>(c.beta)));
    g.backward(scale(total, static_cast<float>(weight)));

    r.l_rec += weight * l_rec.value()[0];
    r.l_commit += weight * l_commit.value()[0];
    r.l_total += weight * total.value()[0];
    stats.add(z_e.value(), q.maps);
    for (const LatentIndexMap& m : q.maps) {
      for (int k : m.indices) ++counts[static_cast<std::size_t>(k)];
    }
  }
  r.codebook_usage_batch = usage_from_counts(counts).usage_fraction;
  for (float v : table_grad.data()) {
    r.codebook_grad_max = std::max(r.codebook_grad_max, static_cast<double>(std::abs(v)));
  }
  ema_update(model.ema, model.codebook, stats);
  return r;
}

UsageReport dataset_usage(const Model& model, std::span<const Tensor> images) {
  if (images.empty()) throw std::invalid_argument("dataset_usage: no images");
  return codebook_stats(encode_indices(model, images), model.config.codebook_size);
}

}  // namespace msvq
