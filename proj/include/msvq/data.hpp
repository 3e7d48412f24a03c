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

// Images, masks, preprocessing, manifests and the procedural phantom set.
//
// Images are 3×H×W tensors in [0, 1]. Masks and latent-cell grids are binary
// H×W grids. The interchange format is binary PPM (P6, maxval 255); a mask
// file is a PPM in which any nonzero pixel is positive.

#ifndef MSVQ_DATA_HPP_
#define MSVQ_DATA_HPP_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "msvq/tensor.hpp"

namespace msvq {

enum class Label { kNormal, kVascular, kPolyp, kInflammatory };

std::string_view label_name(Label label);
/// Throws FormatError for an unknown token.
Label parse_label(std::string_view token);
inline bool is_abnormal(Label label) { return label != Label::kNormal; }

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0 or 1

  Mask() = default;
  Mask(int h, int w, bool fill = false);
  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool operator==(const Mask&) const = default;
};

struct LabeledImage {
  Tensor pixels;
  Label label = Label::kNormal;
  std::optional<Mask> mask;  // present iff abnormal
  int fold = 0;
};

/// Throws FormatError for a malformed header or truncated data and
/// std::runtime_error when the file cannot be opened.
Tensor load_image(const std::string& path);
/// Channels are written as round(v·255) after clamping to [0, 1].
void save_image(const Tensor& image, const std::string& path);
Mask load_mask(const std::string& path);
void save_mask(const Mask& mask, const std::string& path);

Tensor center_crop(const Tensor& image, int size);
Mask center_crop(const Mask& mask, int size);
/// Half-pixel-centred bilinear resampling to size×size.
Tensor resize_bilinear(const Tensor& image, int size);
/// Nearest-neighbour resampling; the result stays binary.
Mask resize_nearest(const Mask& mask, int size);

struct PreprocessGeometry {
  int crop = 320;
  int size = 224;
};

/// Centre crop, then resize. Throws ShapeError when the input is smaller
/// than the crop.
Tensor preprocess(const Tensor& image, PreprocessGeometry geometry = {});
Mask preprocess(const Mask& mask, PreprocessGeometry geometry = {});

Tensor flip_horizontal(const Tensor& image);
Tensor flip_vertical(const Tensor& image);
Mask flip_horizontal(const Mask& mask);
Mask flip_vertical(const Mask& mask);

struct FlipPolicy {
  bool horizontal = true;
  bool vertical = true;
};

/// Each enabled flip is applied independently with probability 1/2; a mask,
/// when given, receives the same flips.
void augment(Tensor& image, Mask* mask, std::mt19937_64& rng, FlipPolicy policy = {});

/// Cell (i, j) is set iff any pixel of the factor×factor block it covers is
/// set. Throws ShapeError unless factor divides both extents.
Mask mask_to_latent_grid(const Mask& mask, int factor);
double mask_area_fraction(const Mask& mask);

/// Largest mask area fraction a splice base may have.
inline constexpr double kMaxAbnormalArea = 0.20;

struct PhantomSpec {
  std::uint64_t seed = 0;
  Label label = Label::kNormal;
  int size = 32;
  double area_fraction = 0.1;  // ignored for normal images
};

/// Smooth warm background plus, for abnormal classes, an elliptical lesion
/// with a class-specific texture. Deterministic in the spec. Throws
/// std::invalid_argument for an abnormal area outside (0, 0.2] or a size
/// below 8.
LabeledImage generate_phantom(const PhantomSpec& spec);

struct ManifestRecord {
  std::string path;
  Label label = Label::kNormal;
  std::string mask_path;  // empty for normal records
  int fold = 0;
  // Synthetic records only.
  std::string normal_source;
  std::string abnormal_source;
};

struct DatasetManifest {
  int folds = 5;
  std::vector<ManifestRecord> records;
};

inline constexpr std::string_view kManifestHeader = "msvq-manifest v1";

/// Throws FormatError with the offending line number for unknown labels,
/// abnormal records without masks, normal records with masks, or folds
/// outside [0, folds).
DatasetManifest parse_manifest(const std::string& path, int folds = 5);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

/// Loads every record; relative paths are resolved against `base_dir`.
std::vector<LabeledImage> load_dataset(const DatasetManifest& manifest,
                                       const std::string& base_dir);

struct PhantomSetSpec {
  int count = 400;
  int size = 32;
  std::uint64_t seed = 0;
  int folds = 5;
  double normal_share = 0.5;
  double min_area = 0.06;
  double max_area = 0.16;
};

/// Phantoms with a fixed class mix: `normal_share` normals, the rest split
/// evenly between the three abnormal classes. Folds are dealt round-robin
/// within each class.
std::vector<LabeledImage> generate_phantom_set(const PhantomSetSpec& spec);

/// Writes images, masks and manifest.tsv into `dir` and returns the
/// manifest.
DatasetManifest write_dataset(const std::vector<LabeledImage>& images, const std::string& dir,
                              int folds);

}  // namespace msvq

#endif  // MSVQ_DATA_HPP_
