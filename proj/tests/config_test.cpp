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

#include <string>

#include <gtest/gtest.h>

#include "msvq/config.hpp"

namespace msvq {
namespace {

std::string error_of(const std::string& text) {
  try {
    parse_run_config(text, "t.cfg");
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, ParsesKeysAndComments) {
  const RunConfig c = parse_run_config(
      "# desk\n"
      "image_size = 32\n"
      "base_channels = 8   # trailing comment\n"
      "codebook_size = 32\nembedding_dim = 16\n"
      "beta = 0.25\nepochs = 200\nbatch_size = 16\n"
      "flip_vertical = false\nmanifest = data/manifest.tsv\n");
  EXPECT_EQ(c.model, ModelConfig::desk_scale());
  EXPECT_EQ(c.epochs, 200);
  EXPECT_FALSE(c.flips.vertical);
  EXPECT_TRUE(c.flips.horizontal);
  EXPECT_EQ(c.manifest, "data/manifest.tsv");
  EXPECT_EQ(c.train_config().batch_size, 16);
}

TEST(RunConfig, DefaultsMatchPaperScale) {
  const RunConfig c = parse_run_config("");
  EXPECT_EQ(c.model, ModelConfig::paper_scale());
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.epochs, 2000);
  EXPECT_DOUBLE_EQ(c.lr.base_lr, 1e-3);
}

TEST(RunConfig, RejectsBadLinesWithLineNumbers) {
  EXPECT_NE(error_of("epochs = 3\nlearning_rate = 1\n").find("t.cfg:2"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\nseed = 2\n").find("t.cfg:2"), std::string::npos);
  EXPECT_FALSE(error_of("epochs 3\n").empty());
  EXPECT_FALSE(error_of("epochs = three\n").empty());
  EXPECT_FALSE(error_of("flip_vertical = maybe\n").empty());
  EXPECT_FALSE(error_of("beta = 0.25x\n").empty());
}

TEST(RunConfig, ValidateCatchesInconsistentModel) {
  EXPECT_THROW(parse_run_config("image_size = 30\n").validate(), std::invalid_argument);
  EXPECT_THROW(parse_run_config("batch_size = 0\n").validate(), std::invalid_argument);
}

TEST(RunConfig, FormatRoundTrips) {
  RunConfig c = parse_run_config("image_size = 64\nbeta = 0.1\nlr = 0.0003\ncrop = 80\n"
                                 "output_dir = out dir\nseed = 18446744073709551615\n");
  const RunConfig back = parse_run_config(format_run_config(c));
  EXPECT_EQ(format_run_config(back), format_run_config(c));
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.output_dir, "out dir");
  EXPECT_EQ(back.lr.base_lr, 0.0003);
}

TEST(RunConfig, PrepareCropsOrRequiresExactSize) {
  RunConfig c = parse_run_config("image_size = 32\nbase_channels = 8\n");
  EXPECT_EQ(c.prepare(Tensor({3, 32, 32})).dims(), (Shape{3, 32, 32}));
  EXPECT_THROW(c.prepare(Tensor({3, 40, 40})), ShapeError);
  c.crop = 36;
  EXPECT_EQ(c.prepare(Tensor({3, 40, 40})).dims(), (Shape{3, 32, 32}));
  EXPECT_EQ(c.prepare(Mask(40, 40)).height, 32);
}

TEST(RunConfig, ShippedProfilesValidate) {
  const RunConfig paper = load_run_config(MSVQ_SOURCE_DIR "/configs/paper.cfg");
  paper.validate();
  EXPECT_EQ(paper.model, ModelConfig::paper_scale());
  EXPECT_EQ(paper.batch_size, 64);
  EXPECT_EQ(paper.crop, 320);

  const RunConfig desk = load_run_config(MSVQ_SOURCE_DIR "/configs/desk.cfg");
  desk.validate();
  EXPECT_EQ(desk.model, ModelConfig::desk_scale());
  EXPECT_EQ(desk.epochs, 200);
}

}  // namespace
}  // namespace msvq
