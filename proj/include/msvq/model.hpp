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

// Encoder/decoder assembly and the training loss.
//
// Encoder: stem 3×3 (3→B, ReLU); per stage s=1..S a residual multiscale block
// at width B·2^(s-1) followed by a 3×3 stride-2 conv doubling the width
// (ReLU); a linear 1×1 projection to D.
//
// Decoder: 1×1 projection D→B·2^S (ReLU); per stage a residual multiscale
// block followed by a 4×4 stride-2 transposed conv halving the width (ReLU);
// a 3×3 head to 3 channels with sigmoid.

#ifndef MSVQ_MODEL_HPP_
#define MSVQ_MODEL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msvq/params.hpp"
#include "msvq/quantizer.hpp"

namespace msvq {

struct ModelConfig {
  int image_size = 224;
  int in_channels = 3;
  int base_channels = 16;
  int stages = 3;
  int codebook_size = 256;  // K
  int embedding_dim = 256;  // D
  double beta = 0.25;
  double gamma = 0.99;
  double epsilon = 1e-5;

  static ModelConfig paper_scale();
  static ModelConfig desk_scale();

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  int latent_size() const { return image_size >> stages; }
  int downsample_factor() const { return 1 << stages; }
  int top_channels() const { return base_channels << stages; }
  bool operator==(const ModelConfig&) const = default;
};

std::vector<ParamSpec> describe_model(const ModelConfig& config);

/// Parameters, codebook and EMA statistics of one model.
struct Model {
  ModelConfig config;
  ParamSet params;
  Codebook codebook;
  EmaState ema;
};

/// Fresh model: He-uniform weights and a normal codebook, both from `seed`.
Model make_model(const ModelConfig& config, std::uint64_t seed);

/// Spatial footprint of one decoder layer. A residual block is described by
/// the single same-padded kernel whose reach equals its widest path.
struct SpatialLayer {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  bool transposed = false;
};

/// The decoder's layers from latent to image, in order.
std::vector<SpatialLayer> decoder_spatial_layers(const ModelConfig& config);

/// Images per graph in training and batched inference.
inline constexpr std::size_t kMicroBatch = 16;

/// Graph-level encoder (3×S×S×N → D×S'×S'×N) and decoder (the reverse).
Var encode(ParamBinding& p, const ModelConfig& config, Var images);
Var decode(ParamBinding& p, const ModelConfig& config, Var latent);

/// Inference helpers (no gradient recording). Each accepts one image
/// (C×H×W) or a batch (C×H×W×N) and answers in kind; every image's result is
/// independent of the rest of its batch, bit for bit.
Tensor encode(const Model& model, const Tensor& images);
Tensor decode(const Model& model, const Tensor& latent);
/// decode(quantize(encode(images))).
Tensor reconstruct(const Model& model, const Tensor& images);

LatentIndexMap encode_indices(const Model& model, const Tensor& image);
std::vector<LatentIndexMap> encode_indices(const Model& model, std::span<const Tensor> images);
Tensor decode_indices(const Model& model, const LatentIndexMap& map);
std::vector<Tensor> decode_indices(const Model& model, std::span<const LatentIndexMap> maps);

/// (1/N)·Σ(x − x̂)² over all N elements.
double reconstruction_loss(const Tensor& x, const Tensor& x_hat);
/// l_rec + β·mean((z_e − z_q)²).
double total_loss(double l_rec, const Tensor& z_e, const Tensor& z_q, double beta);

struct LossReport {
  double l_rec = 0.0;
  double l_commit = 0.0;
  double l_total = 0.0;
  double codebook_usage_batch = 0.0;
  /// Largest |∂L/∂e_k| observed through the graph; zero by construction.
  double codebook_grad_max = 0.0;
};

/// Relative gap between l_total and l_rec + β·l_commit.
double loss_identity_error(const LossReport& r, double beta);

/// One batch: losses averaged over the batch, parameter gradients written to
/// `grads` (which must match model.params), then an EMA codebook update from
/// the batch assignments.
LossReport forward_train(Model& model, std::span<const Tensor> batch, ParamSet& grads);

/// Usage of the current codebook over a dataset pass.
UsageReport dataset_usage(const Model& model, std::span<const Tensor> images);

}  // namespace msvq

#endif  // MSVQ_MODEL_HPP_
