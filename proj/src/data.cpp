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

#include "msvq/data.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace msvq {
namespace {

namespace fs = std::filesystem;

constexpr std::array<std::string_view, 4> kLabelNames = {"normal", "vascular", "polyp",
                                                         "inflammatory"};

// ---------------------------------------------------------------------------
// PPM

struct RawPpm {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> rgb;
};

class HeaderScanner {
 public:
  HeaderScanner(const std::string& bytes, const std::string& path) : b_(bytes), path_(path) {}

  int number() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_ || pos_ - start > 9) throw FormatError(path_ + ": malformed PPM header");
    return std::stoi(b_.substr(start, pos_ - start));
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw FormatError(path_ + ": malformed PPM header");
    }
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& b_;
  const std::string& path_;
  std::size_t pos_ = 2;
};

RawPpm read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError(path + ": not a binary PPM (P6)");
  }
  HeaderScanner scan(bytes, path);
  RawPpm img;
  img.width = scan.number();
  img.height = scan.number();
  const int maxval = scan.number();
  if (img.width <= 0 || img.height <= 0) throw FormatError(path + ": empty PPM");
  if (maxval != 255) throw FormatError(path + ": only maxval 255 is supported");
  const std::size_t start = scan.raster_start();
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - start < need) throw FormatError(path + ": truncated pixel data");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                 bytes.begin() + static_cast<std::ptrdiff_t>(start + need));
  return img;
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& rgb) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << width << ' ' << height << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

void require_image(const Tensor& image, const char* what) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(what) + ": expected 3×H×W image, got " +
                     to_string(image.dims()));
  }
}

// ---------------------------------------------------------------------------
// Phantom helpers

struct Rgb {
  double r, g, b;
};

Rgb mix(Rgb a, Rgb b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

// Value noise: a (cells+1)² lattice of uniform values, smoothly interpolated.
class ValueNoise {
 public:
  ValueNoise(int cells, std::mt19937_64& rng) : cells_(cells) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    lattice_.resize(static_cast<std::size_t>(cells + 1) * (cells + 1));
    for (double& v : lattice_) v = u(rng);
  }

  // (u, v) in [0, 1]².
  double at(double u, double v) const {
    const double fx = std::clamp(u, 0.0, 1.0) * cells_;
    const double fy = std::clamp(v, 0.0, 1.0) * cells_;
    const int x0 = std::min(static_cast<int>(fx), cells_ - 1);
    const int y0 = std::min(static_cast<int>(fy), cells_ - 1);
    const double tx = smooth(fx - x0), ty = smooth(fy - y0);
    const double a = node(y0, x0) + (node(y0, x0 + 1) - node(y0, x0)) * tx;
    const double b = node(y0 + 1, x0) + (node(y0 + 1, x0 + 1) - node(y0 + 1, x0)) * tx;
    return a + (b - a) * ty;
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double node(int y, int x) const {
    return lattice_[static_cast<std::size_t>(y) * (cells_ + 1) + x];
  }

  int cells_;
  std::vector<double> lattice_;
};

struct Ellipse {
  double cx, cy, rx, ry, cos_t, sin_t;

  // Squared normalized radius of the pixel centre (x + 0.5, y + 0.5).
  double radius2(int x, int y) const {
    const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
    const double u = (dx * cos_t + dy * sin_t) / rx;
    const double v = (-dx * sin_t + dy * cos_t) / ry;
    return u * u + v * v;
  }
};

Mask rasterize(const Ellipse& e, int size) {
  Mask m(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) m.at(y, x) = e.radius2(x, y) <= 1.0 ? 1 : 0;
  }
  return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Rgb lesion_color(Label label, const Ellipse& e, int x, int y, const ValueNoise& fine,
                 double stripe_angle, double size) {
  const double u = (x + 0.5) / size, v = (y + 0.5) / size;
  switch (label) {
    case Label::kVascular: {
      const double along = (x + 0.5) * std::cos(stripe_angle) + (y + 0.5) * std::sin(stripe_angle);
      const double s = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * along / 3.0 +
                                             4.0 * fine.at(u, v));
      return mix({0.38, 0.03, 0.05}, {0.80, 0.10, 0.10}, s);
    }
    case Label::kPolyp: {
      const double shade = 1.0 - 0.35 * e.radius2(x, y);
      Rgb c{0.96 * shade, 0.66 * shade, 0.54 * shade};
      const double hx = x + 0.5 - (e.cx - 0.35 * e.rx), hy = y + 0.5 - (e.cy - 0.35 * e.ry);
      const double r = 0.3 * std::min(e.rx, e.ry) + 0.5;
      const double glint = 0.35 * std::exp(-(hx * hx + hy * hy) / (2.0 * r * r));
      return {c.r + glint, c.g + glint, c.b + glint};
    }
    case Label::kInflammatory:
      return mix({0.95, 0.90, 0.78}, {0.78, 0.58, 0.46}, fine.at(u, v));
    case Label::kNormal:
      break;
  }
  throw std::logic_error("lesion_color: normal label");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view label_name(Label label) { return kLabelNames.at(static_cast<std::size_t>(label)); }

Label parse_label(std::string_view token) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == token) return static_cast<Label>(i);
  }
  throw FormatError("unknown label '" + std::string(token) + "'");
}

Mask::Mask(int h, int w, bool fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) throw ShapeError("mask extents must be positive");
  bits.assign(static_cast<std::size_t>(h) * w, fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Tensor load_image(const std::string& path) {
  const RawPpm raw = read_ppm(path);
  const std::size_t plane = static_cast<std::size_t>(raw.width) * raw.height;
  Tensor out({3, raw.height, raw.width});
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + p] = raw.rgb[p * 3 + c] / 255.0f;
  }
  return out;
}

void save_image(const Tensor& image, const std::string& path) {
  require_image(image, "save_image");
  const int h = image.dim(1), w = image.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<unsigned char> rgb(plane * 3);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(image[c * plane + p], 0.0f, 1.0f);
      rgb[p * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  }
  write_ppm(path, w, h, rgb);
}

Mask load_mask(const std::string& path) {
  const RawPpm raw = read_ppm(path);
  Mask m(raw.height, raw.width);
  for (std::size_t p = 0; p < m.bits.size(); ++p) {
    m.bits[p] = (raw.rgb[p * 3] | raw.rgb[p * 3 + 1] | raw.rgb[p * 3 + 2]) ? 1 : 0;
  }
  return m;
}

void save_mask(const Mask& mask, const std::string& path) {
  std::vector<unsigned char> rgb(mask.bits.size() * 3);
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    const unsigned char v = mask.bits[p] ? 255 : 0;
    rgb[p * 3] = rgb[p * 3 + 1] = rgb[p * 3 + 2] = v;
  }
  write_ppm(path, mask.width, mask.height, rgb);
}

Tensor center_crop(const Tensor& image, int size) {
  require_image(image, "center_crop");
  const int h = image.dim(1), w = image.dim(2);
  if (size <= 0 || size > h || size > w) {
    throw ShapeError("center_crop: cannot take " + std::to_string(size) + " from " +
                     to_string(image.dims()));
  }
  const int oy = (h - size) / 2, ox = (w - size) / 2;
  Tensor out({3, size, size});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) out.at(c, y, x) = image.at(c, y + oy, x + ox);
    }
  }
  return out;
}

Mask center_crop(const Mask& mask, int size) {
  if (size <= 0 || size > mask.height || size > mask.width) {
    throw ShapeError("center_crop: mask smaller than crop");
  }
  const int oy = (mask.height - size) / 2, ox = (mask.width - size) / 2;
  Mask out(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) out.at(y, x) = mask.at(y + oy, x + ox);
  }
  return out;
}

Tensor resize_bilinear(const Tensor& image, int size) {
  require_image(image, "resize_bilinear");
  if (size <= 0) throw ShapeError("resize_bilinear: size must be positive");
  const int h = image.dim(1), w = image.dim(2);
  const auto source = [](int dst, int in, int out, int& i0, int& i1, double& t) {
    const double s = std::clamp((dst + 0.5) * in / out - 0.5, 0.0, in - 1.0);
    i0 = static_cast<int>(s);
    i1 = std::min(i0 + 1, in - 1);
    t = s - i0;
  };
  Tensor out({3, size, size});
  for (int y = 0; y < size; ++y) {
    int y0, y1;
    double ty;
    source(y, h, size, y0, y1, ty);
    for (int x = 0; x < size; ++x) {
      int x0, x1;
      double tx;
      source(x, w, size, x0, x1, tx);
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(c, y0, x0) + (image.at(c, y0, x1) - image.at(c, y0, x0)) * tx;
        const double bot = image.at(c, y1, x0) + (image.at(c, y1, x1) - image.at(c, y1, x0)) * tx;
        out.at(c, y, x) = static_cast<float>(top + (bot - top) * ty);
      }
    }
  }
  return out;
}

Mask resize_nearest(const Mask& mask, int size) {
  if (size <= 0) throw ShapeError("resize_nearest: size must be positive");
  Mask out(size, size);
  for (int y = 0; y < size; ++y) {
    const int sy = std::min(mask.height - 1, static_cast<int>((y + 0.5) * mask.height / size));
    for (int x = 0; x < size; ++x) {
      const int sx = std::min(mask.width - 1, static_cast<int>((x + 0.5) * mask.width / size));
      out.at(y, x) = mask.at(sy, sx) ? 1 : 0;
    }
  }
  return out;
}

Tensor preprocess(const Tensor& image, PreprocessGeometry geometry) {
  return resize_bilinear(center_crop(image, geometry.crop), geometry.size);
}

Mask preprocess(const Mask& mask, PreprocessGeometry geometry) {
  return resize_nearest(center_crop(mask, geometry.crop), geometry.size);
}

Tensor flip_horizontal(const Tensor& image) {
  require_image(image, "flip_horizontal");
  Tensor out(image.dims());
  const int h = image.dim(1), w = image.dim(2);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y, w - 1 - x);
    }
  }
  return out;
}

Tensor flip_vertical(const Tensor& image) {
  require_image(image, "flip_vertical");
  Tensor out(image.dims());
  const int h = image.dim(1), w = image.dim(2);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, h - 1 - y, x);
    }
  }
  return out;
}

Mask flip_horizontal(const Mask& mask) {
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(y, mask.width - 1 - x);
  }
  return out;
}

Mask flip_vertical(const Mask& mask) {
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) out.at(y, x) = mask.at(mask.height - 1 - y, x);
  }
  return out;
}

void augment(Tensor& image, Mask* mask, std::mt19937_64& rng, FlipPolicy policy) {
  std::bernoulli_distribution coin(0.5);
  // Both coins are always drawn so the stream does not depend on the policy.
  const bool h = coin(rng) && policy.horizontal;
  const bool v = coin(rng) && policy.vertical;
  if (h) {
    image = flip_horizontal(image);
    if (mask) *mask = flip_horizontal(*mask);
  }
  if (v) {
    image = flip_vertical(image);
    if (mask) *mask = flip_vertical(*mask);
  }
}

Mask mask_to_latent_grid(const Mask& mask, int factor) {
  if (factor <= 0 || mask.height % factor || mask.width % factor) {
    throw ShapeError("mask_to_latent_grid: factor " + std::to_string(factor) +
                     " does not divide " + std::to_string(mask.height) + "x" +
                     std::to_string(mask.width));
  }
  Mask grid(mask.height / factor, mask.width / factor);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) grid.at(y / factor, x / factor) = 1;
    }
  }
  return grid;
}

double mask_area_fraction(const Mask& mask) {
  if (mask.bits.empty()) return 0.0;
  return static_cast<double>(mask.count()) / static_cast<double>(mask.bits.size());
}

LabeledImage generate_phantom(const PhantomSpec& spec) {
  const int size = spec.size;
  if (size < 8) throw std::invalid_argument("phantom size must be at least 8");
  const bool abnormal = is_abnormal(spec.label);
  if (abnormal && !(spec.area_fraction > 0.0 && spec.area_fraction <= kMaxAbnormalArea)) {
    throw std::invalid_argument("phantom lesion area must lie in (0, 0.2]");
  }
  std::mt19937_64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(spec.label)));
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const ValueNoise tone(3, rng);
  const ValueNoise tint(2, rng);
  const Rgb dark{0.55 + 0.1 * u(rng), 0.22 + 0.06 * u(rng), 0.14 + 0.05 * u(rng)};
  const Rgb light{0.90, 0.52 + 0.08 * u(rng), 0.34 + 0.06 * u(rng)};

  LabeledImage out;
  out.label = spec.label;
  out.pixels = Tensor({3, size, size});
  const auto put = [&](int y, int x, Rgb c) {
    out.pixels.at(0, y, x) = static_cast<float>(std::clamp(c.r, 0.0, 1.0));
    out.pixels.at(1, y, x) = static_cast<float>(std::clamp(c.g, 0.0, 1.0));
    out.pixels.at(2, y, x) = static_cast<float>(std::clamp(c.b, 0.0, 1.0));
  };
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double pu = (x + 0.5) / size, pv = (y + 0.5) / size;
      Rgb c = mix(dark, light, tone.at(pu, pv));
      c.g += 0.05 * (tint.at(pu, pv) - 0.5);
      put(y, x, c);
    }
  }
  if (!abnormal) return out;

  // Ellipse of the requested area; radii are corrected against the
  // rasterized area, which matters on small grids.
  const double target = spec.area_fraction * size * size;
  const double aspect = 0.65 + 0.35 * u(rng);
  const double theta = std::numbers::pi * u(rng);
  Ellipse e{0.0, 0.0, std::sqrt(target / (std::numbers::pi * aspect)), 0.0, std::cos(theta),
            std::sin(theta)};
  e.ry = aspect * e.rx;
  const double margin = e.rx + 1.0;
  const double span = std::max(0.0, size - 2.0 * margin);
  e.cx = margin + span * u(rng);
  e.cy = margin + span * u(rng);
  Mask mask = rasterize(e, size);
  for (int i = 0; i < 6 && mask.count() > 0; ++i) {
    const double ratio = target / static_cast<double>(mask.count());
    if (std::abs(ratio - 1.0) < 0.05) break;
    e.rx *= std::sqrt(ratio);
    e.ry *= std::sqrt(ratio);
    mask = rasterize(e, size);
  }

  const ValueNoise fine(std::max(2, size / 3), rng);
  const double stripe_angle = std::numbers::pi * u(rng);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (mask.at(y, x)) put(y, x, lesion_color(spec.label, e, x, y, fine, stripe_angle, size));
    }
  }
  out.mask = std::move(mask);
  return out;
}

DatasetManifest parse_manifest(const std::string& path, int folds) {
  if (folds <= 0) throw std::invalid_argument("parse_manifest: folds must be positive");
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path);
  std::string line;
  if (!std::getline(f, line) || trim(line) != kManifestHeader) {
    throw FormatError(path + ": missing '" + std::string(kManifestHeader) + "' header");
  }
  DatasetManifest m;
  m.folds = folds;
  int number = 1;
  while (std::getline(f, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fail = [&](const std::string& why) {
      return FormatError(path + ":" + std::to_string(number) + ": " + why);
    };
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(trim(col));
    if (cols.size() != 4 && cols.size() != 6) throw fail("expected 4 or 6 tab-separated columns");
    ManifestRecord r;
    r.path = cols[0];
    try {
      r.label = parse_label(cols[1]);
    } catch (const FormatError& e) {
      throw fail(e.what());
    }
    r.mask_path = cols[2] == "-" ? "" : cols[2];
    if (is_abnormal(r.label) && r.mask_path.empty()) throw fail("abnormal record without mask");
    if (!is_abnormal(r.label) && !r.mask_path.empty()) throw fail("normal record with a mask");
    try {
      std::size_t used = 0;
      r.fold = std::stoi(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw fail("bad fold '" + cols[3] + "'");
    }
    if (r.fold < 0 || r.fold >= folds) throw fail("fold " + cols[3] + " outside [0, folds)");
    if (cols.size() == 6) {
      r.normal_source = cols[4];
      r.abnormal_source = cols[5];
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest " + path);
  f << kManifestHeader << '\n';
  for (const ManifestRecord& r : manifest.records) {
    f << r.path << '\t' << label_name(r.label) << '\t' << (r.mask_path.empty() ? "-" : r.mask_path)
      << '\t' << r.fold;
    if (!r.normal_source.empty() || !r.abnormal_source.empty()) {
      f << '\t' << r.normal_source << '\t' << r.abnormal_source;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("failed writing manifest " + path);
}

std::vector<LabeledImage> load_dataset(const DatasetManifest& manifest,
                                       const std::string& base_dir) {
  const auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return (path.is_absolute() ? path : fs::path(base_dir) / path).string();
  };
  std::vector<LabeledImage> out;
  out.reserve(manifest.records.size());
  for (const ManifestRecord& r : manifest.records) {
    LabeledImage img;
    img.pixels = load_image(resolve(r.path));
    img.label = r.label;
    img.fold = r.fold;
    if (!r.mask_path.empty()) {
      img.mask = load_mask(resolve(r.mask_path));
      if (img.mask->height != img.pixels.dim(1) || img.mask->width != img.pixels.dim(2)) {
        throw ShapeError(r.mask_path + ": mask extents differ from " + r.path);
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<LabeledImage> generate_phantom_set(const PhantomSetSpec& spec) {
  if (spec.count < 0 || spec.folds <= 0) throw std::invalid_argument("invalid phantom set");
  if (!(spec.normal_share >= 0.0 && spec.normal_share <= 1.0)) {
    throw std::invalid_argument("normal_share must lie in [0, 1]");
  }
  if (!(spec.min_area > 0.0 && spec.min_area <= spec.max_area &&
        spec.max_area <= kMaxAbnormalArea)) {
    throw std::invalid_argument("lesion areas must satisfy 0 < min <= max <= 0.2");
  }
  const int normals = static_cast<int>(std::lround(spec.count * spec.normal_share));
  std::vector<Label> labels(static_cast<std::size_t>(normals), Label::kNormal);
  for (int i = 0; i < spec.count - normals; ++i) labels.push_back(static_cast<Label>(1 + i % 3));
  std::mt19937_64 rng(mix_seed(spec.seed, 0x5e7));
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_real_distribution<double> area(spec.min_area, spec.max_area);

  std::array<int, 4> dealt{};
  std::vector<LabeledImage> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    PhantomSpec ps;
    ps.seed = mix_seed(spec.seed, i);
    ps.label = labels[i];
    ps.size = spec.size;
    ps.area_fraction = area(rng);
    LabeledImage img = generate_phantom(ps);
    img.fold = dealt[static_cast<std::size_t>(labels[i])]++ % spec.folds;
    out.push_back(std::move(img));
  }
  return out;
}

DatasetManifest write_dataset(const std::vector<LabeledImage>& images, const std::string& dir,
                              int folds) {
  fs::create_directories(dir);
  DatasetManifest m;
  m.folds = folds;
  char name[32];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const LabeledImage& img = images[i];
    ManifestRecord r;
    std::snprintf(name, sizeof(name), "img_%05zu.ppm", i);
    r.path = name;
    save_image(img.pixels, (fs::path(dir) / r.path).string());
    if (img.mask) {
      std::snprintf(name, sizeof(name), "img_%05zu_mask.ppm", i);
      r.mask_path = name;
      save_mask(*img.mask, (fs::path(dir) / r.mask_path).string());
    }
    r.label = img.label;
    r.fold = img.fold;
    m.records.push_back(std::move(r));
  }
  write_manifest(m, (fs::path(dir) / "manifest.tsv").string());
  return m;
}

}  // namespace msvq
