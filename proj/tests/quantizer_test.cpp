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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "msvq/ops.hpp"
#include "msvq/quantizer.hpp"
#include "test_util.hpp"

namespace msvq {
namespace {

using testing::random_tensor;

Codebook two_codes() {
  Codebook cb(2, 2);
  cb.row(1)[0] = 1.0f;
  cb.row(1)[1] = 1.0f;
  return cb;
}

int scan(std::span<const float> z, const Codebook& cb) {
  int best = -1;
  double best_d = 0.0;
  for (int k = 0; k < cb.size(); ++k) {
    double d = 0.0;
    for (int i = 0; i < cb.dim(); ++i) {
      const double diff = double(z[i]) - double(cb.row(k)[i]);
      d += diff * diff;
    }
    if (best < 0 || d < best_d) best = k, best_d = d;
  }
  return best;
}

TEST(NearestCode, Examples) {
  const Codebook cb = two_codes();
  const std::vector<float> near0{0.2f, 0.1f}, tie{0.5f, 0.5f}, exact{1.0f, 1.0f};
  EXPECT_EQ(nearest_code<float>(near0, cb), 0);
  EXPECT_EQ(nearest_code<float>(tie, cb), 0);
  EXPECT_EQ(nearest_code<float>(exact, cb), 1);
}

TEST(NearestCode, DuplicateRowsResolveToLowestIndex) {
  Codebook cb(4, 3);
  for (int k = 1; k < 4; ++k) cb.row(k)[0] = 2.0f;
  const std::vector<float> z{2.0f, 0.0f, 0.0f};
  EXPECT_EQ(nearest_code<float>(z, cb), 1);
}

TEST(NearestCode, DimensionMismatchThrows) {
  const std::vector<float> z{1.0f, 2.0f, 3.0f};
  EXPECT_THROW(nearest_code<float>(z, two_codes()), ShapeError);
}

TEST(Quantize, GridMatchesPerCellScan) {
  Codebook cb(8, 3);
  EmaState ema;
  init_codebook(cb, ema, 1);
  const Tensor z = random_tensor({3, 4, 4}, 2);
  const Quantized q = quantize(z, cb);
  ASSERT_EQ(q.maps.size(), 1u);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      std::vector<float> cell(3);
      for (int d = 0; d < 3; ++d) cell[d] = z.at(d, y, x);
      const int k = scan(cell, cb);
      EXPECT_EQ(q.maps[0].at(y, x), k);
      for (int d = 0; d < 3; ++d) EXPECT_EQ(q.values.at(d, y, x), cb.row(k)[d]);
    }
}

TEST(Quantize, IsIdempotent) {
  Codebook cb(8, 3);
  EmaState ema;
  init_codebook(cb, ema, 3);
  const Quantized once = quantize(random_tensor({3, 5, 5, 2}, 4), cb);
  const Quantized twice = quantize(once.values, cb);
  EXPECT_TRUE(twice.values.bit_equal(once.values));
  EXPECT_EQ(twice.maps, once.maps);
}

TEST(Quantize, LookupInvertsIndexMap) {
  Codebook cb(6, 2);
  EmaState ema;
  init_codebook(cb, ema, 5);
  const Quantized q = quantize(random_tensor({2, 3, 3}, 6), cb);
  EXPECT_TRUE(lookup(q.maps[0], cb).bit_equal(q.values));
}

TEST(EmbeddingLookup, GradientScattersIntoRows) {
  Codebook cb(3, 2);
  EmaState ema;
  init_codebook(cb, ema, 7);
  LatentIndexMap map(1, 2);
  map.at(0, 0) = 2;
  map.at(0, 1) = 2;
  Graph g;
  Var table = g.parameter(codebook_tensor(cb));
  g.backward(sum(embedding_lookup(table, {&map, 1})));
  EXPECT_EQ(table.grad()[0], 0.0f);
  EXPECT_EQ(table.grad()[4], 2.0f);
  EXPECT_EQ(table.grad()[5], 2.0f);
}

TEST(EmaUpdate, CountExample) {
  BasicCodebook<double> cb(1, 1);
  BasicEmaState<double> s;
  init_codebook(cb, s, 1);
  s.gamma = 0.9;
  BatchStats batch(1, 1);
  const std::vector<double> z{0.0};
  for (int i = 0; i < 3; ++i) batch.add(0, std::span<const double>(z));
  ema_update(s, cb, batch);
  EXPECT_NEAR(s.n_hat[0], 1.2, 1e-15);
}

TEST(EmaUpdate, MatchesDirectFormulaInDouble) {
  const int k_count = 5, dim = 3;
  BasicCodebook<double> cb(k_count, dim);
  BasicEmaState<double> s;
  init_codebook(cb, s, 2);
  std::vector<double> n(k_count, 1.0), m(cb.data().begin(), cb.data().end());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int step = 0; step < 10; ++step) {
    BatchStats batch(k_count, dim);
    for (int cell = 0; cell < 12; ++cell) {
      std::vector<double> z(dim);
      for (double& v : z) v = normal(rng);
      batch.add(static_cast<int>(rng() % 4), std::span<const double>(z));  // code 4 idles
    }
    ema_update(s, cb, batch);
    for (int k = 0; k < k_count; ++k) {
      n[k] = 0.99 * n[k] + 0.01 * batch.counts[k];
      for (int d = 0; d < dim; ++d) {
        double& mk = m[k * dim + d];
        mk = 0.99 * mk + 0.01 * batch.sums[k * dim + d];
        EXPECT_NEAR(cb.row(k)[d], mk / (n[k] + 1e-5), 1e-12);
      }
    }
  }
  EXPECT_NEAR(s.n_hat[4], std::pow(0.99, 10), 1e-12);
}

TEST(EmaUpdate, EmptyStepAtInitIsNearFixedPoint) {
  Codebook cb(16, 4);
  EmaState s;
  init_codebook(cb, s, 9);
  const Codebook before = cb;
  ema_update(s, cb, BatchStats(16, 4));
  const double bound = 2.0 * s.epsilon / s.gamma;
  for (int k = 0; k < 16; ++k)
    for (int d = 0; d < 4; ++d) {
      const double e = before.row(k)[d];
      EXPECT_LE(std::abs(cb.row(k)[d] - e), bound * std::abs(e) + 1e-7);
    }
}

TEST(EmaUpdate, RejectsBadArguments) {
  Codebook cb(2, 2);
  EmaState s;
  init_codebook(cb, s, 1);
  EXPECT_THROW(ema_update(s, cb, BatchStats(3, 2)), ShapeError);
  s.gamma = 1.0;
  EXPECT_THROW(ema_update(s, cb, BatchStats(2, 2)), std::invalid_argument);
}

TEST(CodebookStats, Examples) {
  LatentIndexMap one(2, 2, 0);
  UsageReport r = codebook_stats({&one, 1}, 4);
  EXPECT_DOUBLE_EQ(r.usage_fraction, 0.25);
  EXPECT_DOUBLE_EQ(r.perplexity, 1.0);

  LatentIndexMap uniform(1, 4);
  for (int i = 0; i < 4; ++i) uniform.at(0, i) = i;
  r = codebook_stats({&uniform, 1}, 4);
  EXPECT_DOUBLE_EQ(r.usage_fraction, 1.0);
  EXPECT_NEAR(r.perplexity, 4.0, 1e-12);

  LatentIndexMap partial(1, 4);
  partial.indices = {0, 0, 1, 2};
  r = codebook_stats({&partial, 1}, 4);
  EXPECT_DOUBLE_EQ(r.usage_fraction, 0.75);
  EXPECT_NEAR(r.perplexity, std::exp(-(0.5 * std::log(0.5) + 0.5 * std::log(0.25))), 1e-12);
  EXPECT_NEAR(r.perplexity, 2.828, 1e-3);
}

TEST(CodebookStats, RejectsEmptyAndOutOfRange) {
  EXPECT_THROW(codebook_stats({}, 4), std::invalid_argument);
  LatentIndexMap bad(1, 1, 7);
  EXPECT_THROW(codebook_stats({&bad, 1}, 4), std::out_of_range);
}

}  // namespace
}  // namespace msvq
