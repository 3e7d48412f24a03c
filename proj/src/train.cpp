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

#include "msvq/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace msvq {
namespace {

// Activations are allocated and released every step. Keeping them on the
// heap instead of round-tripping through mmap avoids refaulting their pages.
void retain_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  lr.validate();
}

TrainResult train(Model& model, std::span<const Tensor> images, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (images.empty()) throw std::invalid_argument("train: no images");
  retain_heap();

  std::mt19937_64 rng(config.seed);
  AdamState adam = make_adam_state(model.params);
  ParamSet grads = model.params.zeros_like();
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  TrainResult result;
  std::vector<Tensor> current;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_at(config.lr, epoch);
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t end = std::min(order.size(), b + batch);
      current.clear();
      for (std::size_t i = b; i < end; ++i) {
        current.push_back(images[order[i]]);
        augment(current.back(), nullptr, rng, config.flips);
      }
      const LossReport r = forward_train(model, current, grads);
      adam_step(model.params, grads, adam, log.lr);

      const double w = static_cast<double>(end - b) / static_cast<double>(order.size());
      log.l_rec += w * r.l_rec;
      log.l_commit += w * r.l_commit;
      log.l_total += w * r.l_total;
      log.codebook_usage_batch += w * r.codebook_usage_batch;
      result.max_identity_error =
          std::max(result.max_identity_error, loss_identity_error(r, model.config.beta));
      result.max_codebook_grad = std::max(result.max_codebook_grad, r.codebook_grad_max);
      result.steps.push_back(r);
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.final_usage = dataset_usage(model, images);
  return result;
}

}  // namespace msvq
