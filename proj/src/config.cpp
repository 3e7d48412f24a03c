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

#include "msvq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace msvq {
namespace {

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::string parse_string(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

std::string show(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MSVQ_INT_KEY(key, field)                                                  \
  Key {                                                                           \
    key, [](RunConfig& c, const std::string& v) { c.field = parse_number<int>(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                \
  }
#define MSVQ_DOUBLE_KEY(key, field)                                                  \
  Key {                                                                              \
    key, [](RunConfig& c, const std::string& v) { c.field = parse_number<double>(v); }, \
        [](const RunConfig& c) { return show(c.field); }                             \
  }
#define MSVQ_BOOL_KEY(key, field)                                             \
  Key {                                                                       \
    key, [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); } \
  }
#define MSVQ_STRING_KEY(key, field)                                              \
  Key {                                                                          \
    key, [](RunConfig& c, const std::string& v) { c.field = parse_string(v); }, \
        [](const RunConfig& c) { return "\"" + c.field + "\""; }                 \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      MSVQ_INT_KEY("image_size", model.image_size),
      MSVQ_INT_KEY("base_channels", model.base_channels),
      MSVQ_INT_KEY("stages", model.stages),
      MSVQ_INT_KEY("codebook_size", model.codebook_size),
      MSVQ_INT_KEY("embedding_dim", model.embedding_dim),
      MSVQ_DOUBLE_KEY("beta", model.beta),
      MSVQ_DOUBLE_KEY("gamma", model.gamma),
      MSVQ_DOUBLE_KEY("epsilon", model.epsilon),
      MSVQ_INT_KEY("epochs", epochs),
      MSVQ_INT_KEY("batch_size", batch_size),
      Key{"seed",
          [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      MSVQ_DOUBLE_KEY("lr", lr.base_lr),
      MSVQ_DOUBLE_KEY("lr_decay", lr.decay_factor),
      MSVQ_INT_KEY("lr_decay_every", lr.decay_every),
      MSVQ_BOOL_KEY("flip_horizontal", flips.horizontal),
      MSVQ_BOOL_KEY("flip_vertical", flips.vertical),
      MSVQ_INT_KEY("crop", crop),
      MSVQ_INT_KEY("classifier_epochs", classifier.epochs),
      MSVQ_DOUBLE_KEY("classifier_lr", classifier.lr),
      MSVQ_INT_KEY("classifier_batch_size", classifier.batch_size),
      MSVQ_STRING_KEY("manifest", manifest),
      MSVQ_STRING_KEY("checkpoint_dir", checkpoint_dir),
      MSVQ_STRING_KEY("output_dir", output_dir),
  };
  return table;
}

#undef MSVQ_INT_KEY
#undef MSVQ_DOUBLE_KEY
#undef MSVQ_BOOL_KEY
#undef MSVQ_STRING_KEY

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.seed = seed;
  t.flips = flips;
  return t;
}

EvalConfig RunConfig::eval_config() const {
  EvalConfig e;
  e.classifier = classifier;
  e.classifier.seed = seed;
  e.classifier.flips = flips;
  e.seed = seed;
  return e;
}

void RunConfig::validate() const {
  model.validate();
  if (crop < 0) throw std::invalid_argument("crop must be non-negative");
  train_config().validate();
  classifier.validate();
}

Tensor RunConfig::prepare(const Tensor& image) const {
  if (crop > 0) return preprocess(image, {crop, model.image_size});
  if (image.rank() != 3 || image.dim(1) != model.image_size || image.dim(2) != model.image_size) {
    throw ShapeError("image is " + to_string(image.dims()) + " but the model expects " +
                     std::to_string(model.image_size) + "x" + std::to_string(model.image_size) +
                     "; set crop to resample");
  }
  return image;
}

Mask RunConfig::prepare(const Mask& mask) const {
  if (crop > 0) return preprocess(mask, {crop, model.image_size});
  if (mask.height != model.image_size || mask.width != model.image_size) {
    throw ShapeError("mask does not match the model resolution; set crop to resample");
  }
  return mask;
}

std::string_view build_id() {
#ifdef MSVQ_BUILD_ID
  return MSVQ_BUILD_ID;
#else
  return "unknown";
#endif
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto where = [&] { return origin + ":" + std::to_string(number) + ": "; };
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError(where() + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw FormatError(where() + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw FormatError(where() + "repeated key '" + key + "'");
    try {
      it->set(c, value);
    } catch (const std::invalid_argument& e) {
      throw FormatError(where() + key + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  std::ostringstream text;
  text << f.rdbuf();
  return parse_run_config(text.str(), path);
}

std::string format_run_config(const RunConfig& config) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace msvq
