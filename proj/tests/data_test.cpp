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
#include <fstream>
#include <map>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "msvq/data.hpp"
#include "test_util.hpp"

namespace msvq {
namespace {

using testing::random_tensor;
using testing::TempDir;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

Mask random_mask(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mask m(size, size);
  for (auto& b : m.bits) b = rng() % 5 == 0;
  return m;
}

TEST(ImageIo, RoundTripWithinOneLevel) {
  TempDir dir("io");
  const Tensor img = random_tensor({3, 5, 7}, 1, 0.0f, 1.0f);
  save_image(img, dir.file("a.ppm"));
  const Tensor back = load_image(dir.file("a.ppm"));
  ASSERT_EQ(back.dims(), img.dims());
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back[i] - img[i]), 1.0f / 255.0f);
}

TEST(ImageIo, BlackFileAndHeaderComments) {
  TempDir dir("io");
  write_text(dir.file("b.ppm"), std::string("P6\n# comment\n2 1\n255\n") + std::string(6, '\0'));
  const Tensor img = load_image(dir.file("b.ppm"));
  EXPECT_EQ(img.dims(), (Shape{3, 1, 2}));
  for (float v : img.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ImageIo, MalformedFilesThrow) {
  TempDir dir("io");
  write_text(dir.file("magic.ppm"), "P5\n1 1\n255\nx");
  EXPECT_THROW(load_image(dir.file("magic.ppm")), FormatError);
  write_text(dir.file("short.ppm"), "P6\n2 2\n255\nabc");
  EXPECT_THROW(load_image(dir.file("short.ppm")), FormatError);
  write_text(dir.file("deep.ppm"), "P6\n1 1\n65535\nabcdef");
  EXPECT_THROW(load_image(dir.file("deep.ppm")), FormatError);
  EXPECT_THROW(load_image(dir.file("absent.ppm")), std::runtime_error);
}

TEST(MaskIo, AnyNonzeroChannelIsPositive) {
  TempDir dir("io");
  std::string px = "P6\n3 1\n255\n";
  px += std::string{'\0', '\0', '\0', '\0', '\1', '\0', '\xff', '\xff', '\xff'};
  write_text(dir.file("m.ppm"), px);
  const Mask m = load_mask(dir.file("m.ppm"));
  EXPECT_EQ(m.bits, (std::vector<std::uint8_t>{0, 1, 1}));
  save_mask(m, dir.file("n.ppm"));
  EXPECT_EQ(load_mask(dir.file("n.ppm")), m);
}

TEST(Preprocess, ConstantImageStaysConstant) {
  const Tensor out = preprocess(Tensor({3, 360, 360}, 0.375f));
  EXPECT_EQ(out.dims(), (Shape{3, 224, 224}));
  for (float v : out.data()) EXPECT_NEAR(v, 0.375f, 1e-6);
}

TEST(Preprocess, CropRemovesBorderOf20) {
  // A border of 20 pixels is dropped: 360 - 2·20 = 320.
  Tensor img({3, 360, 360}, 1.0f);
  for (int c = 0; c < 3; ++c)
    for (int y = 20; y < 340; ++y)
      for (int x = 20; x < 340; ++x) img.at(c, y, x) = 0.0f;
  const Tensor crop = center_crop(img, 320);
  for (float v : crop.data()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(center_crop(img, 400), ShapeError);
  EXPECT_THROW(preprocess(Tensor({3, 300, 300})), ShapeError);
}

TEST(Preprocess, MasksStayBinary) {
  const Mask m = preprocess(random_mask(360, 2));
  EXPECT_EQ(m.height, 224);
  for (auto b : m.bits) EXPECT_LE(b, 1);
}

TEST(Flips, AreInvolutionsAndAugmentFollowsPolicy) {
  const Tensor img = random_tensor({3, 4, 6}, 3);
  EXPECT_TRUE(flip_horizontal(flip_horizontal(img)).bit_equal(img));
  EXPECT_TRUE(flip_vertical(flip_vertical(img)).bit_equal(img));
  EXPECT_EQ(flip_horizontal(img).at(1, 2, 0), img.at(1, 2, 5));
  EXPECT_EQ(flip_vertical(img).at(1, 0, 2), img.at(1, 3, 2));

  std::mt19937_64 rng(4);
  for (int i = 0; i < 8; ++i) {
    Tensor copy = img;
    augment(copy, nullptr, rng, {.horizontal = false, .vertical = false});
    EXPECT_TRUE(copy.bit_equal(img));
  }
}

TEST(Flips, MaskFollowsImage) {
  // A one-hot image channel and its mask must land on the same pixel.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 16; ++trial) {
    Tensor img({3, 6, 6});
    Mask mask(6, 6);
    img.at(0, 1, 2) = 1.0f;
    mask.at(1, 2) = 1;
    augment(img, &mask, rng);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) EXPECT_EQ(img.at(0, y, x) == 1.0f, mask.at(y, x) == 1);
  }
}

TEST(LatentGrid, Examples) {
  Mask m(224, 224);
  EXPECT_EQ(mask_to_latent_grid(m, 8).count(), 0u);
  m.at(0, 0) = 1;
  const Mask g = mask_to_latent_grid(m, 8);
  EXPECT_EQ(g.height, 28);
  EXPECT_EQ(g.count(), 1u);
  EXPECT_EQ(g.at(0, 0), 1);
  EXPECT_EQ(mask_to_latent_grid(Mask(32, 32, true), 8).count(), 16u);
  EXPECT_THROW(mask_to_latent_grid(Mask(30, 30), 8), ShapeError);
}

TEST(LatentGrid, CommutesWithFlips) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Mask m = random_mask(32, seed);
    EXPECT_EQ(flip_horizontal(mask_to_latent_grid(m, 8)), mask_to_latent_grid(flip_horizontal(m), 8));
    EXPECT_EQ(flip_vertical(mask_to_latent_grid(m, 8)), mask_to_latent_grid(flip_vertical(m), 8));
  }
}

TEST(AreaFraction, Examples) {
  EXPECT_EQ(mask_area_fraction(Mask(4, 4)), 0.0);
  Mask half(4, 4);
  for (int i = 0; i < 8; ++i) half.bits[i] = 1;
  EXPECT_EQ(mask_area_fraction(half), 0.5);
  Mask near(224, 224);
  for (int i = 0; i < 10035; ++i) near.bits[i] = 1;
  EXPECT_NEAR(mask_area_fraction(near), 10035.0 / 50176.0, 1e-15);
  EXPECT_LT(mask_area_fraction(near), kMaxAbnormalArea);
}

TEST(Phantom, DeterministicWithMaskOnlyForAbnormal) {
  const PhantomSpec spec{.seed = 11, .label = Label::kVascular, .size = 32, .area_fraction = 0.1};
  const LabeledImage a = generate_phantom(spec), b = generate_phantom(spec);
  EXPECT_TRUE(a.pixels.bit_equal(b.pixels));
  ASSERT_TRUE(a.mask.has_value());
  EXPECT_EQ(*a.mask, *b.mask);
  EXPECT_FALSE(generate_phantom({.seed = 11, .label = Label::kNormal}).mask.has_value());
  for (float v : a.pixels.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Phantom, LesionAreaTracksTarget) {
  for (Label label : {Label::kVascular, Label::kPolyp, Label::kInflammatory}) {
    for (double area : {0.06, 0.1, 0.16}) {
      const LabeledImage p = generate_phantom({.seed = 3, .label = label, .size = 64, .area_fraction = area});
      EXPECT_NEAR(mask_area_fraction(*p.mask), area, 0.2 * area);
    }
  }
  EXPECT_THROW(generate_phantom({.label = Label::kPolyp, .area_fraction = 0.3}), std::invalid_argument);
  EXPECT_THROW(generate_phantom({.size = 4}), std::invalid_argument);
}

TEST(PhantomSet, ClassMixAndFolds) {
  const auto set = generate_phantom_set({.count = 40, .size = 16, .seed = 2});
  ASSERT_EQ(set.size(), 40u);
  std::map<Label, int> per_class;
  std::map<int, int> normal_folds, abnormal_folds;
  for (const LabeledImage& img : set) {
    ++per_class[img.label];
    ++(is_abnormal(img.label) ? abnormal_folds : normal_folds)[img.fold];
  }
  EXPECT_EQ(per_class[Label::kNormal], 20);
  for (Label l : {Label::kVascular, Label::kPolyp, Label::kInflammatory}) EXPECT_GE(per_class[l], 6);
  for (int f = 0; f < 5; ++f) {
    EXPECT_EQ(normal_folds[f], 4);
    EXPECT_GE(abnormal_folds[f], 3);
  }
}

TEST(Manifest, RoundTripAndDataset) {
  TempDir dir("manifest");
  const auto set = generate_phantom_set({.count = 10, .size = 16, .seed = 3});
  const DatasetManifest written = write_dataset(set, dir.path().string(), 5);
  const DatasetManifest parsed = parse_manifest(dir.file("manifest.tsv"));
  ASSERT_EQ(parsed.records.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(parsed.records[i].path, written.records[i].path);
    EXPECT_EQ(parsed.records[i].label, written.records[i].label);
    EXPECT_EQ(parsed.records[i].fold, written.records[i].fold);
  }
  const auto loaded = load_dataset(parsed, dir.path().string());
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(loaded[i].mask.has_value(), is_abnormal(set[i].label));
    if (loaded[i].mask) {
      EXPECT_EQ(*loaded[i].mask, *set[i].mask);
    }
  }
}

TEST(Manifest, ProvenanceColumnsSurvive) {
  TempDir dir("manifest");
  DatasetManifest m;
  m.records.push_back({"s.ppm", Label::kPolyp, "s_mask.ppm", 3, "n.ppm", "a.ppm"});
  write_manifest(m, dir.file("m.tsv"));
  const DatasetManifest p = parse_manifest(dir.file("m.tsv"));
  EXPECT_EQ(p.records[0].normal_source, "n.ppm");
  EXPECT_EQ(p.records[0].abnormal_source, "a.ppm");
}

TEST(Manifest, Errors) {
  TempDir dir("manifest");
  const std::string header = std::string(kManifestHeader) + "\n";
  write_text(dir.file("empty.tsv"), header);
  EXPECT_TRUE(parse_manifest(dir.file("empty.tsv")).records.empty());

  const std::map<std::string, std::string> bad{
      {"nomask.tsv", header + "a.ppm\tpolyp\t-\t0\n"},
      {"normalmask.tsv", header + "a.ppm\tnormal\tm.ppm\t0\n"},
      {"label.tsv", header + "a.ppm\tulcer\t-\t0\n"},
      {"fold.tsv", header + "a.ppm\tnormal\t-\t5\n"},
      {"columns.tsv", header + "a.ppm\tnormal\t-\n"},
      {"header.tsv", "a.ppm\tnormal\t-\t0\n"},
  };
  for (const auto& [name, text] : bad) {
    write_text(dir.file(name), text);
    EXPECT_THROW(parse_manifest(dir.file(name)), FormatError) << name;
  }
  try {
    parse_manifest(dir.file("nomask.tsv"));
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

}  // namespace
}  // namespace msvq
