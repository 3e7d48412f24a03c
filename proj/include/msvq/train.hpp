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

// Training loop for the autoencoder.

#ifndef MSVQ_TRAIN_HPP_
#define MSVQ_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "msvq/adam.hpp"
#include "msvq/data.hpp"
#include "msvq/model.hpp"

namespace msvq {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  LrSchedule lr;
  std::uint64_t seed = 0;  // shuffling and augmentation
  FlipPolicy flips;

  void validate() const;
};

/// Means over the steps of one epoch, weighted by batch size.
struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double l_rec = 0.0;
  double l_commit = 0.0;
  double l_total = 0.0;
  double codebook_usage_batch = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<LossReport> steps;
  double max_identity_error = 0.0;
  double max_codebook_grad = 0.0;
  UsageReport final_usage;  // one pass over the unaugmented images
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Shuffles every epoch, applies flips, and takes one Adam step per batch
/// (the last batch of an epoch may be short). Deterministic in the model and
/// config.
TrainResult train(Model& model, std::span<const Tensor> images, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace msvq

#endif  // MSVQ_TRAIN_HPP_
