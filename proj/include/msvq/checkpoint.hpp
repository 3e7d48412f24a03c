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

// Binary model checkpoints.
//
// Layout (little-endian): "MSVQ", u32 version, u32 K, D, image_size,
// base_channels, stages, f64 beta, gamma, epsilon, u32 tensor count, then per
// tensor (sorted by name) a u16 name length, the UTF-8 name, u8 rank, u32
// extents and raw float32 values. The codebook and EMA statistics are stored
// as the tensors "vq.codebook", "vq.ema.n_hat" and "vq.ema.m_hat".

#ifndef MSVQ_CHECKPOINT_HPP_
#define MSVQ_CHECKPOINT_HPP_

#include <string>

#include "msvq/model.hpp"

namespace msvq {

inline constexpr unsigned kCheckpointVersion = 1;

/// Writes atomically (temporary file, then rename). Throws std::runtime_error
/// on I/O failure.
void save_checkpoint(const Model& model, const std::string& path);

/// Throws FormatError ("bad magic", "version mismatch", "truncated payload",
/// or an inconsistent tensor set), and
/// std::runtime_error when the file cannot be read.
Model load_checkpoint(const std::string& path);

}  // namespace msvq

#endif  // MSVQ_CHECKPOINT_HPP_
