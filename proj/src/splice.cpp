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

#include "msvq/splice.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

namespace msvq {
namespace {

namespace fs = std::filesystem;

struct Interval {
  int lo;
  int hi;
};

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output rows reached by input rows [lo, hi] of one layer, clamped to the
// output extent, which is returned through `extent`.
Interval reach(const SpatialLayer& l, Interval in, int& extent) {
  Interval out;
  if (l.transposed) {
    extent = (extent - 1) * l.stride - 2 * l.padding + l.kernel;
    out = {in.lo * l.stride - l.padding, in.hi * l.stride - l.padding + l.kernel - 1};
  } else {
    extent = (extent + 2 * l.padding - l.kernel) / l.stride + 1;
    out = {-floor_div(-(in.lo + l.padding - l.kernel + 1), l.stride),
           floor_div(in.hi + l.padding, l.stride)};
  }
  return {std::max(out.lo, 0), std::min(out.hi, extent - 1)};
}

// Image rows (or columns) reachable from each latent row.
std::vector<Interval> axis_reach(const ModelConfig& config) {
  const std::vector<SpatialLayer> layers = decoder_spatial_layers(config);
  std::vector<Interval> out;
  for (int i = 0; i < config.latent_size(); ++i) {
    int extent = config.latent_size();
    Interval r{i, i};
    for (const SpatialLayer& l : layers) r = reach(l, r, extent);
    if (extent != config.image_size) throw std::logic_error("decoder stack geometry mismatch");
    out.push_back(r);
  }
  return out;
}

void check_request(const ModelConfig& config, const SpliceRequest& r) {
  const Shape image{3, config.image_size, config.image_size};
  if (r.normal.dims() != image || r.abnormal.dims() != image) {
    throw ShapeError("synthesize: images must be " + to_string(image) + ", got " +
                     to_string(r.normal.dims()) + " and " + to_string(r.abnormal.dims()));
  }
  if (r.mask.height != config.image_size || r.mask.width != config.image_size) {
    throw ShapeError("synthesize: mask extents differ from the image");
  }
  if (mask_area_fraction(r.mask) > kMaxAbnormalArea) {
    throw IneligibleMask("synthesize: mask covers " +
                         std::to_string(mask_area_fraction(r.mask) * 100.0) +
                         "% of the image, above the 20% limit");
  }
}

}  // namespace

LatentIndexMap splice_indices(const LatentIndexMap& normal, const LatentIndexMap& abnormal,
                              const Mask& cells) {
  if (normal.height != abnormal.height || normal.width != abnormal.width ||
      cells.height != normal.height || cells.width != normal.width) {
    throw ShapeError("splice_indices: index maps and cell grid must share extents");
  }
  LatentIndexMap out = normal;
  for (std::size_t i = 0; i < out.indices.size(); ++i) {
    if (cells.bits[i]) out.indices[i] = abnormal.indices[i];
  }
  return out;
}

std::vector<SpliceResult> synthesize(const Model& model, std::span<const SpliceRequest> requests) {
  std::vector<Tensor> images;
  images.reserve(requests.size() * 2);
  for (const SpliceRequest& r : requests) {
    check_request(model.config, r);
    images.push_back(r.normal);
    images.push_back(r.abnormal);
  }
  std::vector<LatentIndexMap> maps = encode_indices(model, images);
  std::vector<SpliceResult> results(requests.size());
  std::vector<LatentIndexMap> spliced;
  spliced.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    SpliceResult& r = results[i];
    r.normal_map = std::move(maps[2 * i]);
    r.abnormal_map = std::move(maps[2 * i + 1]);
    r.cells = mask_to_latent_grid(requests[i].mask, model.config.downsample_factor());
    r.spliced_map = splice_indices(r.normal_map, r.abnormal_map, r.cells);
    spliced.push_back(r.spliced_map);
  }
  std::vector<Tensor> decoded = decode_indices(model, spliced);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].image = std::move(decoded[i]);
  return results;
}

SpliceResult synthesize(const Model& model, const SpliceRequest& request) {
  return std::move(synthesize(model, std::span<const SpliceRequest>(&request, 1)).front());
}

Mask influence_mask(const ModelConfig& config, const Mask& cells) {
  if (cells.height != config.latent_size() || cells.width != config.latent_size()) {
    throw ShapeError("influence_mask: cell grid does not match the latent extent");
  }
  const std::vector<Interval> axis = axis_reach(config);
  Mask out(config.image_size, config.image_size);
  for (int i = 0; i < cells.height; ++i) {
    for (int j = 0; j < cells.width; ++j) {
      if (!cells.at(i, j)) continue;
      for (int y = axis[i].lo; y <= axis[i].hi; ++y) {
        for (int x = axis[j].lo; x <= axis[j].hi; ++x) out.at(y, x) = 1;
      }
    }
  }
  return out;
}

std::vector<SplicePair> draw_pairs(std::size_t normals, std::size_t abnormals, std::uint64_t seed,
                                   std::size_t count) {
  if (count == 0) return {};
  if (normals == 0 || abnormals == 0) {
    throw std::invalid_argument("draw_pairs: both pools must be non-empty");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(abnormals);
  std::vector<SplicePair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (i % abnormals == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
    }
    pairs.push_back({static_cast<std::size_t>(rng() % normals), order[i % abnormals]});
  }
  return pairs;
}

DatasetManifest batch_synthesize(const DatasetManifest& manifest, const std::string& base_dir,
                                 const Model& model, std::uint64_t seed, std::size_t count,
                                 const std::string& out_dir, std::ostream& log) {
  const std::vector<LabeledImage> images = load_dataset(manifest, base_dir);
  std::vector<std::size_t> normals, abnormals;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!is_abnormal(images[i].label)) {
      normals.push_back(i);
    } else if (mask_area_fraction(*images[i].mask) > kMaxAbnormalArea) {
      log << "skip " << manifest.records[i].path << ": mask covers "
          << mask_area_fraction(*images[i].mask) * 100.0 << "% of the image\n";
    } else {
      abnormals.push_back(i);
    }
  }
  DatasetManifest out;
  out.folds = manifest.folds;
  if (count == 0) return out;
  if (normals.empty() || abnormals.empty()) throw std::runtime_error("no eligible pairs");

  const std::vector<SplicePair> pairs = draw_pairs(normals.size(), abnormals.size(), seed, count);
  fs::create_directories(out_dir);
  char name[32];
  for (std::size_t start = 0; start < pairs.size(); start += kMicroBatch) {
    const std::size_t end = std::min(pairs.size(), start + kMicroBatch);
    std::vector<SpliceRequest> requests;
    for (std::size_t i = start; i < end; ++i) {
      const LabeledImage& n = images[normals[pairs[i].normal]];
      const LabeledImage& a = images[abnormals[pairs[i].abnormal]];
      requests.push_back({n.pixels, a.pixels, *a.mask});
    }
    const std::vector<SpliceResult> results = synthesize(model, requests);
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t n = normals[pairs[i].normal];
      const std::size_t a = abnormals[pairs[i].abnormal];
      ManifestRecord r;
      std::snprintf(name, sizeof(name), "syn_%05zu.ppm", i);
      r.path = name;
      std::snprintf(name, sizeof(name), "syn_%05zu_mask.ppm", i);
      r.mask_path = name;
      r.label = images[a].label;
      r.fold = images[a].fold;
      r.normal_source = manifest.records[n].path;
      r.abnormal_source = manifest.records[a].path;
      save_image(results[i - start].image, (fs::path(out_dir) / r.path).string());
      save_mask(*images[a].mask, (fs::path(out_dir) / r.mask_path).string());
      out.records.push_back(std::move(r));
    }
  }
  write_manifest(out, (fs::path(out_dir) / "manifest.tsv").string());
  return out;
}

}  // namespace msvq
