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

// Run configuration files: one `key = value` per line, `#` starts a comment.
// Every key is optional; omitted keys keep the defaults below.
//
//   image_size 224        base_channels 16      stages 3
//   codebook_size 256     embedding_dim 256     beta 0.25
//   gamma 0.99            epsilon 1e-5
//   epochs 2000           batch_size 64         seed 0
//   lr 0.001              lr_decay 0.9          lr_decay_every 100
//   flip_horizontal true  flip_vertical true
//   classifier_epochs 30  classifier_lr 0.003   classifier_batch_size 16
//   crop 0                (0: images must already be image_size square;
//                          otherwise centre crop to `crop`, then resize)
//   manifest ""           checkpoint_dir "."    output_dir "."

#ifndef MSVQ_CONFIG_HPP_
#define MSVQ_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "msvq/eval.hpp"
#include "msvq/model.hpp"
#include "msvq/train.hpp"

namespace msvq {

struct RunConfig {
  ModelConfig model;
  int epochs = 2000;
  int batch_size = 64;
  LrSchedule lr;
  std::uint64_t seed = 0;
  FlipPolicy flips;
  int crop = 0;
  ClassifierConfig classifier;
  std::string manifest;
  std::string checkpoint_dir = ".";
  std::string output_dir = ".";

  TrainConfig train_config() const;
  EvalConfig eval_config() const;
  /// Checks every section; throws std::invalid_argument.
  void validate() const;
  /// Brings an image (and mask) to the model resolution per `crop`; throws
  /// ShapeError when that is impossible.
  Tensor prepare(const Tensor& image) const;
  Mask prepare(const Mask& mask) const;
};

/// Throws FormatError, naming the line, for unknown or repeated keys,
/// malformed lines and unparsable values.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);

/// Renders every key in file syntax; parsing the result gives back `config`.
std::string format_run_config(const RunConfig& config);

/// `git describe` of the source tree at build time.
std::string_view build_id();

}  // namespace msvq

#endif  // MSVQ_CONFIG_HPP_
