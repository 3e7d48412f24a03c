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

// Gradient checks of every layer family against double-precision central
// differences of the reference implementation.

#ifndef MSVQ_GRADCHECK_SUITE_HPP_
#define MSVQ_GRADCHECK_SUITE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "msvq/gradcheck.hpp"

namespace msvq {

inline constexpr double kGradcheckEps = 1e-3;
inline constexpr double kGradcheckTolerance = 1e-4;

struct FamilyCheck {
  std::string family;
  GradCheckReport report;  // worst case over the family's configurations
};

/// Families: conv2d, conv2d_transposed, msb, residual_msb, encoder_decoder
/// (without the quantizer), decoder_through_quantizer and commitment. Losses
/// are fixed random projections or sums of squares, so typical gradients are
/// of order one and the error measure is effectively relative.
std::vector<FamilyCheck> run_gradcheck_suite(std::uint64_t seed,
                                             std::size_t coords_per_family = 256);

}  // namespace msvq

#endif  // MSVQ_GRADCHECK_SUITE_HPP_
