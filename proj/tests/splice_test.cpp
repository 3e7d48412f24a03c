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

#include <filesystem>
#include <map>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "msvq/splice.hpp"
#include "test_util.hpp"

namespace msvq {
namespace {

using testing::TempDir;

// One stage, so a single cell does not reach the whole image.
ModelConfig one_stage() {
  ModelConfig c;
  c.image_size = 16;
  c.base_channels = 4;
  c.stages = 1;
  c.codebook_size = 8;
  c.embedding_dim = 4;
  return c;
}

LabeledImage phantom(std::uint64_t seed, Label label, int size, double area = 0.1) {
  return generate_phantom({.seed = seed, .label = label, .size = size, .area_fraction = area});
}

TEST(SpliceIndices, Examples) {
  LatentIndexMap n(2, 2, 1), a(2, 2, 5);
  EXPECT_EQ(splice_indices(n, a, Mask(2, 2)), n);
  EXPECT_EQ(splice_indices(n, a, Mask(2, 2, true)), a);
  Mask one(2, 2);
  one.at(1, 0) = 1;
  const LatentIndexMap s = splice_indices(n, a, one);
  EXPECT_EQ(s.indices, (std::vector<int>{1, 1, 5, 1}));
  EXPECT_THROW(splice_indices(n, LatentIndexMap(3, 2), one), ShapeError);
  EXPECT_THROW(splice_indices(n, a, Mask(3, 3)), ShapeError);
}

TEST(Synthesize, SelfSpliceAndEmptyMaskGiveReconstruction) {
  const Model m = make_model(ModelConfig::desk_scale(), 1);
  const LabeledImage n = phantom(1, Label::kNormal, 32);
  const LabeledImage a = phantom(2, Label::kPolyp, 32);
  const Tensor rec = reconstruct(m, n.pixels);
  EXPECT_TRUE(synthesize(m, {n.pixels, n.pixels, *a.mask}).image.bit_equal(rec));
  EXPECT_TRUE(synthesize(m, {n.pixels, a.pixels, Mask(32, 32)}).image.bit_equal(rec));
}

TEST(Synthesize, ChangesOnlyMaskedCells) {
  const Model m = make_model(ModelConfig::desk_scale(), 2);
  const LabeledImage n = phantom(3, Label::kNormal, 32);
  const LabeledImage a = phantom(4, Label::kInflammatory, 32, 0.15);
  const SpliceResult r = synthesize(m, {n.pixels, a.pixels, *a.mask});
  for (std::size_t i = 0; i < r.spliced_map.indices.size(); ++i) {
    EXPECT_EQ(r.spliced_map.indices[i],
              r.cells.bits[i] ? r.abnormal_map.indices[i] : r.normal_map.indices[i]);
  }
  EXPECT_EQ(r.normal_map, encode_indices(m, n.pixels));
}

TEST(Synthesize, BatchEqualsSingle) {
  const Model m = make_model(ModelConfig::desk_scale(), 3);
  std::vector<SpliceRequest> reqs;
  for (int i = 0; i < 3; ++i) {
    const LabeledImage a = phantom(10 + i, Label::kVascular, 32);
    reqs.push_back({phantom(20 + i, Label::kNormal, 32).pixels, a.pixels, *a.mask});
  }
  const auto batch = synthesize(m, reqs);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(batch[i].image.bit_equal(synthesize(m, reqs[i]).image));
}

TEST(Synthesize, RejectsLargeMaskAndWrongShapes) {
  const Model m = make_model(ModelConfig::desk_scale(), 4);
  const Tensor img = phantom(1, Label::kNormal, 32).pixels;
  Mask big(32, 32);
  for (std::size_t i = 0; i < 206; ++i) big.bits[i] = 1;  // 206/1024 > 0.2
  EXPECT_THROW(synthesize(m, {img, img, big}), IneligibleMask);
  Mask limit(32, 32);
  for (std::size_t i = 0; i < 204; ++i) limit.bits[i] = 1;
  EXPECT_NO_THROW(synthesize(m, {img, img, limit}));
  EXPECT_THROW(synthesize(m, {Tensor({3, 16, 16}), img, limit}), ShapeError);
  EXPECT_THROW(synthesize(m, {img, img, Mask(16, 16)}), ShapeError);
}

TEST(InfluenceMask, HandComputedOneStage) {
  // Rows reached from latent row 7 of 8: 1×1 keeps [7,7]; the 9-wide block
  // gives [3,7]; the transposed conv gives [5,15]; the 3×3 head gives [4,15].
  Mask cells(8, 8);
  cells.at(7, 7) = 1;
  const Mask reach = influence_mask(one_stage(), cells);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) EXPECT_EQ(reach.at(y, x), y >= 4 && x >= 4) << y << "," << x;

  // Row 0 reaches [0, 11].
  Mask corner(8, 8);
  corner.at(0, 0) = 1;
  EXPECT_EQ(influence_mask(one_stage(), corner).count(), 12u * 12u);
  EXPECT_EQ(influence_mask(one_stage(), Mask(8, 8)).count(), 0u);
  EXPECT_THROW(influence_mask(one_stage(), Mask(4, 4)), ShapeError);
}

TEST(InfluenceMask, PixelsOutsideAreUnchanged) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Model m = make_model(one_stage(), seed);
    const LatentIndexMap base = encode_indices(m, phantom(seed, Label::kNormal, 16).pixels);
    LatentIndexMap changed = base;
    Mask cells(8, 8);
    const int y = static_cast<int>(seed % 8), x = static_cast<int>((seed * 3 + 5) % 8);
    cells.at(y, x) = 1;
    changed.at(y, x) = (base.at(y, x) + 1) % 8;
    const Tensor a = decode_indices(m, base), b = decode_indices(m, changed);
    const Mask reach = influence_mask(m.config, cells);
    int differing_inside = 0;
    for (int c = 0; c < 3; ++c)
      for (int py = 0; py < 16; ++py)
        for (int px = 0; px < 16; ++px) {
          if (!reach.at(py, px)) {
            EXPECT_EQ(a.at(c, py, px), b.at(c, py, px));
          } else {
            differing_inside += a.at(c, py, px) != b.at(c, py, px);
          }
        }
    EXPECT_GT(differing_inside, 0);
  }
}

TEST(DrawPairs, DeterministicAndBalanced) {
  EXPECT_TRUE(draw_pairs(0, 0, 1, 0).empty());
  EXPECT_THROW(draw_pairs(0, 3, 1, 2), std::invalid_argument);
  const auto a = draw_pairs(10, 4, 7, 12), b = draw_pairs(10, 4, 7, 12);
  std::map<std::size_t, int> uses;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].normal, b[i].normal);
    EXPECT_EQ(a[i].abnormal, b[i].abnormal);
    EXPECT_LT(a[i].normal, 10u);
    ++uses[a[i].abnormal];
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(uses[k], 3);
}

class BatchSynthesizeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    set_ = generate_phantom_set({.count = 12, .size = 32, .seed = 5});
    manifest_ = write_dataset(set_, dir_.file("in"), 5);
  }
  TempDir dir_{"splice"};
  std::vector<LabeledImage> set_;
  DatasetManifest manifest_;
  Model model_ = make_model(ModelConfig::desk_scale(), 6);
};

TEST_F(BatchSynthesizeTest, WritesProvenance) {
  std::ostringstream log;
  const DatasetManifest out =
      batch_synthesize(manifest_, dir_.file("in"), model_, 9, 7, dir_.file("out"), log);
  ASSERT_EQ(out.records.size(), 7u);
  std::map<std::string, const ManifestRecord*> by_path;
  for (const ManifestRecord& r : manifest_.records) by_path[r.path] = &r;
  for (const ManifestRecord& r : out.records) {
    EXPECT_TRUE(std::filesystem::exists(dir_.file("out/" + r.path)));
    const ManifestRecord& src = *by_path.at(r.abnormal_source);
    EXPECT_EQ(r.label, src.label);
    EXPECT_EQ(r.fold, src.fold);
    EXPECT_FALSE(is_abnormal(by_path.at(r.normal_source)->label));
  }
  const DatasetManifest parsed = parse_manifest(dir_.file("out/manifest.tsv"));
  EXPECT_EQ(parsed.records.size(), 7u);
  const DatasetManifest again =
      batch_synthesize(manifest_, dir_.file("in"), model_, 9, 7, dir_.file("again"), log);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(again.records[i].normal_source, out.records[i].normal_source);
    EXPECT_EQ(again.records[i].abnormal_source, out.records[i].abnormal_source);
  }
}

TEST_F(BatchSynthesizeTest, CountZeroAndNoEligiblePairs) {
  std::ostringstream log;
  EXPECT_TRUE(
      batch_synthesize(manifest_, dir_.file("in"), model_, 1, 0, dir_.file("none"), log).records.empty());

  // Replace every abnormal mask by a full one.
  for (const ManifestRecord& r : manifest_.records) {
    if (is_abnormal(r.label)) save_mask(Mask(32, 32, true), dir_.file("in/" + r.mask_path));
  }
  try {
    batch_synthesize(manifest_, dir_.file("in"), model_, 1, 3, dir_.file("big"), log);
    ADD_FAILURE() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "no eligible pairs");
  }
  EXPECT_NE(log.str().find("skip"), std::string::npos);
}

}  // namespace
}  // namespace msvq
