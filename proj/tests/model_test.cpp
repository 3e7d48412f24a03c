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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "msvq/adam.hpp"
#include "msvq/data.hpp"
#include "msvq/model.hpp"
#include "msvq/msb.hpp"
#include "test_util.hpp"

namespace msvq {
namespace {

using testing::random_tensor;

ModelConfig tiny_config() {
  ModelConfig c;
  c.image_size = 16;
  c.base_channels = 4;
  c.stages = 2;
  c.codebook_size = 8;
  c.embedding_dim = 4;
  return c;
}

Tensor random_image(int size, std::uint64_t seed) {
  return random_tensor({3, size, size}, seed, 0.0f, 1.0f);
}

TEST(Msb, ZeroInputZeroOutput) {
  for (bool residual : {false, true}) {
    std::vector<ParamSpec> specs;
    if (residual) {
      describe_residual_msb(specs, "blk", 5);
    } else {
      describe_msb(specs, "blk.msb", 5);
    }
    const ParamSet params = init_params(specs, 1);
    Graph g(GradMode::kInference);
    ParamBinding p(g, params);
    Var x = g.constant(Tensor({5, 7, 7, 1}));
    const Tensor& y =
        residual ? residual_msb_forward(p, "blk", x).value() : msb_forward(p, "blk.msb", x).value();
    EXPECT_EQ(y.dims(), (Shape{5, 7, 7, 1}));
    for (float v : y.data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Msb, ParameterLayout) {
  std::vector<ParamSpec> specs;
  describe_residual_msb(specs, "b", 4);
  const ParamSet p = init_params(specs, 0);
  EXPECT_EQ(p.at("b.msb.branch7.weight").dims(), (Shape{4, 4, 7, 7}));
  EXPECT_EQ(p.at("b.msb.aggregate.weight").dims(), (Shape{12, 12, 1, 1}));
  EXPECT_EQ(p.at("b.msb.reduce.weight").dims(), (Shape{4, 12, 3, 3}));
  EXPECT_EQ(p.at("b.skip.weight").dims(), (Shape{4, 4, 3, 3}));
  EXPECT_EQ(p.at("b.fuse.weight").dims(), (Shape{4, 4, 1, 1}));
}

TEST(Model, PaperScaleGeometry) {
  const Model m = make_model(ModelConfig::paper_scale(), 1);
  const Tensor z = encode(m, random_image(224, 2));
  EXPECT_EQ(z.dims(), (Shape{256, 28, 28}));
  EXPECT_EQ(decode(m, z).dims(), (Shape{3, 224, 224}));
}

TEST(Model, DeskScaleGeometryAndRange) {
  const Model m = make_model(ModelConfig::desk_scale(), 1);
  const Tensor z = encode(m, random_image(32, 3));
  EXPECT_EQ(z.dims(), (Shape{16, 4, 4}));
  const Tensor x_hat = decode(m, z);
  EXPECT_EQ(x_hat.dims(), (Shape{3, 32, 32}));
  for (float v : x_hat.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_TRUE(decode(m, z).bit_equal(x_hat));
}

TEST(Model, ZeroImageGivesZeroLatent) {
  const Model m = make_model(tiny_config(), 4);
  const Tensor z = encode(m, Tensor({3, 16, 16}));
  for (float v : z.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Model, RejectsWrongInput) {
  const Model m = make_model(tiny_config(), 4);
  EXPECT_THROW(encode(m, Tensor({3, 8, 8})), ShapeError);
  EXPECT_THROW(decode(m, Tensor({5, 4, 4})), ShapeError);
  ModelConfig bad = tiny_config();
  bad.image_size = 18;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Model, BatchedInferenceEqualsSingleImage) {
  const Model m = make_model(ModelConfig::desk_scale(), 5);
  std::vector<Tensor> images;
  for (int i = 0; i < 19; ++i) images.push_back(random_image(32, 10 + i));
  const std::vector<LatentIndexMap> maps = encode_indices(m, images);
  const std::vector<Tensor> decoded = decode_indices(m, maps);
  const Tensor batch = reconstruct(m, stack_images(images));
  for (int i = 0; i < 19; ++i) {
    EXPECT_EQ(maps[i], encode_indices(m, images[i]));
    EXPECT_TRUE(decoded[i].bit_equal(decode_indices(m, maps[i])));
    EXPECT_TRUE(unstack_image(batch, i).bit_equal(reconstruct(m, images[i])));
  }
}

TEST(Loss, Examples) {
  const Tensor x({2}, std::vector<float>{1.0f, 0.0f});
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, Tensor({2})), 0.5);
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, x), 0.0);
  EXPECT_THROW(reconstruction_loss(x, Tensor({3})), ShapeError);

  // Commitment term mean((z_e - z_q)^2) = 0.8.
  const Tensor z_e({1}, std::vector<float>{0.0f});
  const Tensor z_q({1}, std::vector<float>{static_cast<float>(std::sqrt(0.8))});
  EXPECT_NEAR(total_loss(0.5, z_e, z_q, 0.25), 0.7, 1e-7);
  EXPECT_DOUBLE_EQ(total_loss(0.5, z_e, z_e, 0.25), 0.5);
}

TEST(ForwardTrain, IdentityAndNoCodebookGradient) {
  Model m = make_model(tiny_config(), 6);
  ParamSet grads = m.params.zeros_like();
  std::vector<Tensor> batch;
  for (int i = 0; i < 5; ++i) batch.push_back(random_image(16, 20 + i));
  const LossReport r = forward_train(m, batch, grads);
  EXPECT_LE(loss_identity_error(r, m.config.beta), 1e-6);
  EXPECT_EQ(r.codebook_grad_max, 0.0);
  EXPECT_GT(r.l_rec, 0.0);
  double norm = 0.0;
  for (const auto& [name, g] : grads)
    for (float v : g.data()) norm += double(v) * v;
  EXPECT_GT(norm, 0.0);
}

TEST(ForwardTrain, IdenticalImagesAverageToSingleValue) {
  const Tensor img = random_image(16, 30);
  Model a = make_model(tiny_config(), 7);
  Model b = a;
  ParamSet ga = a.params.zeros_like(), gb = b.params.zeros_like();
  const std::vector<Tensor> one{img}, three{img, img, img};
  EXPECT_NEAR(forward_train(a, one, ga).l_rec, forward_train(b, three, gb).l_rec, 1e-7);
}

TEST(ForwardTrain, MovesCodebookByEma) {
  Model m = make_model(tiny_config(), 8);
  const Codebook before = m.codebook;
  ParamSet grads = m.params.zeros_like();
  const std::vector<Tensor> batch{random_image(16, 31)};
  forward_train(m, batch, grads);
  bool moved = false;
  for (std::size_t i = 0; i < before.data().size(); ++i)
    moved |= before.data()[i] != m.codebook.data()[i];
  EXPECT_TRUE(moved);
  EXPECT_THROW(forward_train(m, {}, grads), std::invalid_argument);
}

TEST(ForwardTrain, OverfitsOneImage) {
  Model m = make_model(ModelConfig::desk_scale(), 9);
  ParamSet grads = m.params.zeros_like();
  AdamState adam = make_adam_state(m.params);
  const std::vector<Tensor> batch{
      generate_phantom({.seed = 3, .label = Label::kPolyp, .size = 32, .area_fraction = 0.12}).pixels};
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 500; ++step) {
    last = forward_train(m, batch, grads).l_rec;
    if (step == 0) first = last;
    adam_step(m.params, grads, adam, 1e-3);
  }
  EXPECT_LT(last, 0.1 * first);
}

TEST(DecoderLayers, FootprintReproducesImageSize) {
  const ModelConfig c = ModelConfig::desk_scale();
  int extent = c.latent_size();
  for (const SpatialLayer& l : decoder_spatial_layers(c)) {
    extent = l.transposed ? (extent - 1) * l.stride - 2 * l.padding + l.kernel
                          : (extent + 2 * l.padding - l.kernel) / l.stride + 1;
  }
  EXPECT_EQ(extent, c.image_size);
}

}  // namespace
}  // namespace msvq
