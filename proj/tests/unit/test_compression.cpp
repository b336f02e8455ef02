/*
 * Copyright 2026 The bygrad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "bygrad/compression.hpp"
#include "test_util.hpp"

namespace bygrad {
namespace {

using testing::near_rel;
using testing::random_vectors;

TEST(Compressor, ParseAndSpecRoundTrip) {
  for (const char* spec : {"identity", "sparsify:30", "stoch_quant"}) {
    EXPECT_EQ(Compressor::parse(spec).spec(), spec);
  }
  EXPECT_EQ(Compressor::parse("sparsify:3").kept(), 3u);
  for (const char* bad : {"", "sparsify", "sparsify:0", "sparsify:-1", "sparsify:x", "zip"}) {
    EXPECT_THROW((void)Compressor::parse(bad), std::invalid_argument) << bad;
  }
}

TEST(Compressor, DeltaAndUplink) {
  EXPECT_EQ(delta_of(Compressor::identity(), 100), 0.0);
  EXPECT_DOUBLE_EQ(delta_of(Compressor::random_sparsification(30), 100), 100.0 / 30.0 - 1.0);
  EXPECT_DOUBLE_EQ(delta_of(Compressor::stochastic_quantization(), 100), 49.0);
  EXPECT_EQ(delta_of(Compressor::stochastic_quantization(), 2), 0.0);
  EXPECT_EQ(uplink_scalars(Compressor::identity(), 100), 100u);
  EXPECT_EQ(uplink_scalars(Compressor::random_sparsification(30), 100), 60u);
  EXPECT_EQ(uplink_scalars(Compressor::stochastic_quantization(), 100), 102u);
  EXPECT_THROW((void)delta_of(Compressor::random_sparsification(5), 4), std::invalid_argument);
}

TEST(Sparsify, ExactEnumerationIsUnbiasedAndTight) {
  RngStream rng(1);
  for (std::size_t Q = 1; Q <= 10; ++Q) {
    const ModelVector g = random_vectors(rng, 1, Q).front();
    for (std::size_t k = 1; k <= Q; ++k) {
      const double factor = static_cast<double>(Q) / static_cast<double>(k);
      ModelVector mean(Q);
      double err = 0.0;
      std::size_t count = 0;
      for_each_combination(Q, k, [&](const std::vector<std::size_t>& s) {
        ModelVector out(Q);
        for (std::size_t q : s) out[q] = g[q] * factor;
        mean += out;
        err += squared_distance(out, g);
        ++count;
      });
      mean *= 1.0 / static_cast<double>(count);
      for (std::size_t q = 0; q < Q; ++q) EXPECT_TRUE(near_rel(mean[q], g[q], 1e-12));
      const Compressor c = Compressor::random_sparsification(k);
      EXPECT_TRUE(near_rel(err / count, delta_of(c, Q) * squared_norm(g), 1e-12));
      EXPECT_TRUE(near_rel(expected_squared_error(c, g), err / count, 1e-12));
    }
  }
}

TEST(Sparsify, OutputHasExactlyKScaledCoordinates) {
  RngStream rng(2);
  const ModelVector g = random_vectors(rng, 1, 20).front();
  const Compressor c = Compressor::random_sparsification(7);
  for (int t = 0; t < 100; ++t) {
    const ModelVector out = compress(c, g, rng);
    std::size_t nz = 0;
    for (std::size_t q = 0; q < 20; ++q) {
      if (out[q] != 0.0) {
        ++nz;
        EXPECT_EQ(out[q], g[q] * (20.0 / 7.0));
      }
    }
    EXPECT_EQ(nz, 7u);
  }
  EXPECT_THROW((void)compress(Compressor::random_sparsification(21), g, rng),
               std::invalid_argument);
}

TEST(Sparsify, MonteCarloErrorMatchesDelta) {
  RngStream rng(3);
  const ModelVector g = random_vectors(rng, 1, 12).front();
  const Compressor c = Compressor::random_sparsification(4);
  const int M = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int m = 0; m < M; ++m) {
    const double e = squared_distance(compress(c, g, rng), g) / squared_norm(g);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / M;
  const double se = std::sqrt((sum_sq / M - mean * mean) / M);
  EXPECT_NEAR(mean, 2.0, 4 * se);
}

TEST(Quantize, TwoLevelsAndUnbiased) {
  RngStream rng(4);
  const ModelVector g = random_vectors(rng, 1, 10).front();
  const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
  const Compressor c = Compressor::stochastic_quantization();
  const int M = 100000;
  std::vector<double> sum(10, 0.0), sum_sq(10, 0.0);
  double err = 0.0;
  for (int m = 0; m < M; ++m) {
    const ModelVector out = compress(c, g, rng);
    for (std::size_t q = 0; q < 10; ++q) {
      ASSERT_TRUE(out[q] == *lo || out[q] == *hi);
      sum[q] += out[q];
      sum_sq[q] += out[q] * out[q];
    }
    err += squared_distance(out, g);
  }
  for (std::size_t q = 0; q < 10; ++q) {
    const double mean = sum[q] / M;
    const double var = sum_sq[q] / M - mean * mean;
    const double se = std::sqrt(std::max(var, 0.0) / M);
    // The two extreme coordinates never move; only summation rounding remains.
    EXPECT_NEAR(mean, g[q], std::max(4 * se, 1e-9 * std::abs(g[q])));
  }
  const double analytic = expected_squared_error(c, g);
  EXPECT_NEAR(err / M, analytic, 0.02 * analytic);
  EXPECT_LE(analytic, delta_of(c, 10) * squared_norm(g));
}

TEST(Quantize, DeltaIsAttainedSupremum) {
  // g = (1, -1, 0, ..., 0) attains E||C(g)-g||^2 = (Q-2)/2 ||g||^2.
  for (std::size_t Q : {3u, 5u, 10u}) {
    ModelVector g(Q);
    g[0] = 1.0;
    g[1] = -1.0;
    const Compressor c = Compressor::stochastic_quantization();
    EXPECT_DOUBLE_EQ(expected_squared_error(c, g), delta_of(c, Q) * squared_norm(g));
  }
}

TEST(Quantize, ConstantVectorIsUnchanged) {
  RngStream rng(5);
  const ModelVector g(6, 2.5);
  EXPECT_EQ(compress(Compressor::stochastic_quantization(), g, rng), g);
}

TEST(Compress, IdentityAndNonFinite) {
  RngStream rng(6);
  const ModelVector g{1.0, -2.0};
  EXPECT_EQ(compress(Compressor::identity(), g, rng), g);
  ModelVector bad{1.0, std::nan("")};
  EXPECT_THROW((void)compress(Compressor::identity(), bad, rng), std::invalid_argument);
}

}  // namespace
}  // namespace bygrad
