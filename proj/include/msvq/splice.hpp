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

// Latent splicing: the index map of a normal image takes the codes of an
// abnormal image inside the abnormality's latent footprint, and the result is
// decoded. The abnormality stays where it was in the source image.

#ifndef MSVQ_SPLICE_HPP_
#define MSVQ_SPLICE_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msvq/data.hpp"
#include "msvq/model.hpp"

namespace msvq {

/// A splice base whose mask covers more than kMaxAbnormalArea.
class IneligibleMask : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// out(i, j) = abnormal(i, j) where cells(i, j) is set, else normal(i, j).
/// Throws ShapeError unless all three grids share extents.
LatentIndexMap splice_indices(const LatentIndexMap& normal, const LatentIndexMap& abnormal,
                              const Mask& cells);

struct SpliceRequest {
  Tensor normal;    // 3×S×S, S = image_size
  Tensor abnormal;  // 3×S×S
  Mask mask;        // S×S
};

struct SpliceResult {
  Tensor image;
  LatentIndexMap normal_map;
  LatentIndexMap abnormal_map;
  LatentIndexMap spliced_map;
  Mask cells;  // latent footprint of the mask
};

/// Throws IneligibleMask for a mask above the area limit and ShapeError for
/// images or masks that do not match the model.
SpliceResult synthesize(const Model& model, const SpliceRequest& request);
/// Batched form; each result equals the single-request result bit for bit.
std::vector<SpliceResult> synthesize(const Model& model, std::span<const SpliceRequest> requests);

/// Pixels of the decoded image that any set cell of `cells` can reach
/// through the decoder, derived from decoder_spatial_layers().
Mask influence_mask(const ModelConfig& config, const Mask& cells);

struct SplicePair {
  std::size_t normal = 0;
  std::size_t abnormal = 0;
};

/// `count` pairs over the given pools. Abnormal sources are visited in
/// shuffled rounds so each is used as evenly as possible; normal sources are
/// drawn uniformly. Deterministic in the seed. Throws std::invalid_argument
/// for an empty pool when count > 0.
std::vector<SplicePair> draw_pairs(std::size_t normals, std::size_t abnormals, std::uint64_t seed,
                                   std::size_t count);

/// File-level batch synthesis. Abnormal records whose mask exceeds the area
/// limit are skipped with a line on `log`. Writes images, masks and a
/// manifest carrying provenance into `out_dir`; each record inherits label
/// and fold from its abnormal source. Throws std::runtime_error("no eligible
/// pairs") when count > 0 and no normal or no eligible abnormal exists.
DatasetManifest batch_synthesize(const DatasetManifest& manifest, const std::string& base_dir,
                                 const Model& model, std::uint64_t seed, std::size_t count,
                                 const std::string& out_dir, std::ostream& log);

}  // namespace msvq

#endif  // MSVQ_SPLICE_HPP_
