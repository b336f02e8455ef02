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

#include <sstream>

#include "bygrad/data.hpp"
#include "test_util.hpp"

namespace bygrad {
namespace {

Dataset small_dataset(std::uint64_t seed, double sigma_h = 0.3, std::size_t n = 12,
                      std::size_t dim = 5) {
  DatasetOptions o;
  o.num_subsets = n;
  o.dim = dim;
  o.sigma_h = sigma_h;
  return generate_lr_dataset(RngStream(seed), o);
}

TEST(Dataset, ShapeAndDeterminism) {
  const Dataset a = small_dataset(1), b = small_dataset(1), c = small_dataset(2);
  EXPECT_EQ(a.num_subsets(), 12u);
  EXPECT_EQ(a.dim(), 5u);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  EXPECT_DOUBLE_EQ(a.sigma_h(), 0.3);
}

TEST(Dataset, InvalidOptionsThrow) {
  DatasetOptions o;
  o.num_subsets = 0;
  EXPECT_THROW((void)generate_lr_dataset(RngStream(1), o), std::invalid_argument);
  o.num_subsets = 3;
  o.sigma_h = -1.0;
  EXPECT_THROW((void)generate_lr_dataset(RngStream(1), o), std::invalid_argument);
}

TEST(Dataset, FeatureVarianceMatches) {
  DatasetOptions o;
  o.num_subsets = 400;
  o.dim = 50;
  const Dataset d = generate_lr_dataset(RngStream(4), o);
  double sum_sq = 0.0;
  for (const Subset& s : d.subsets()) sum_sq += squared_norm(s.samples.front().z);
  EXPECT_NEAR(sum_sq / (400.0 * 50.0), 100.0, 3.0);
}

TEST(Dataset, HeterogeneityGrowsWithSigma) {
  // Hidden models spread out as sigma_H grows, so gradients at x=0 spread
  // out too.
  const ModelVector x(5);
  double prev = -1.0;
  for (double sigma : {0.0, 0.5, 2.0, 8.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      total += heterogeneity(small_dataset(seed, sigma, 40), x);
    }
    EXPECT_GT(total, prev);
    prev = total;
  }
}

TEST(Gradients, FullGradientIsSumOfLocal) {
  const Dataset d = small_dataset(3);
  RngStream rng(9);
  const ModelVector x = testing::random_vectors(rng, 1, 5).front();
  const auto grads = local_gradients(d, x);
  const ModelVector full = full_gradient(d, x);
  ModelVector manual = grads[0];
  for (std::size_t k = 1; k < grads.size(); ++k) manual += grads[k];
  EXPECT_EQ(full, manual);
  EXPECT_EQ(mean_gradient(d, x), scale(full, 1.0 / 12.0));
}

TEST(Gradients, MatchFiniteDifferences) {
  const Dataset d = small_dataset(5);
  RngStream rng(10);
  const ModelVector x = testing::random_vectors(rng, 1, 5).front();
  const ModelVector g = full_gradient(d, x);
  for (std::size_t q = 0; q < 5; ++q) {
    const double h = 1e-4;
    ModelVector xp = x, xm = x;
    xp[q] += h;
    xm[q] -= h;
    const double fd = (full_loss(d, xp) - full_loss(d, xm)) / (2 * h);
    EXPECT_NEAR(fd, g[q], 1e-5 * std::max(1.0, std::abs(g[q])));
  }
}

TEST(Gradients, SumGradientsUsesGivenIndices) {
  RngStream rng(1);
  const auto grads = testing::random_vectors(rng, 6, 3);
  const std::vector<std::size_t> idx{1, 4};
  EXPECT_EQ(sum_gradients(grads, idx), grads[1] + grads[4]);
  EXPECT_THROW((void)sum_gradients(grads, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Smoothness, EstimateLBoundsCurvature) {
  // L = sum ||z_k||^2 upper-bounds the Hessian sum z z^T in every direction.
  const Dataset d = small_dataset(6);
  const double L = estimate_L(d);
  RngStream rng(3);
  for (const ModelVector& u : testing::random_vectors(rng, 20, 5)) {
    const ModelVector x(5);
    const ModelVector gx = full_gradient(d, x);
    const ModelVector gu = full_gradient(d, u);
    EXPECT_LE(squared_norm(gu - gx), L * L * squared_norm(u) * (1 + 1e-12));
  }
}

TEST(Heterogeneity, BetaEstimateIsMaxOverProbes) {
  const Dataset d = small_dataset(7);
  RngStream rng(2);
  const auto probes = testing::random_vectors(rng, 4, 5);
  double best = 0.0;
  for (const auto& p : probes) best = std::max(best, heterogeneity(d, p));
  EXPECT_DOUBLE_EQ(estimate_beta_sq(d, probes), best);
}

TEST(DatasetCsv, RoundTripsExactly) {
  const Dataset d = small_dataset(8);
  std::stringstream s;
  write_dataset_csv(s, d);
  const Dataset back = read_dataset_csv(s, 0.3);
  EXPECT_EQ(back, d);
}

TEST(DatasetCsv, RejectsMissingHeader) {
  std::stringstream s("0,1,2\n");
  EXPECT_THROW((void)read_dataset_csv(s), std::invalid_argument);
}

TEST(Loss, WrongModelDimensionThrows) {
  const Dataset d = small_dataset(1);
  EXPECT_THROW((void)full_loss(d, ModelVector(4)), std::invalid_argument);
}

}  // namespace
}  // namespace bygrad
