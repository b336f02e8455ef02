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

// Synthetic heterogeneous linear-regression data and its loss/gradients.
//
// The training set is split into N subsets. Subset k holds samples (z, y)
// generated from a subset-specific hidden model whose entries have variance
// 1 + (k+1) * sigma_h, so sigma_h controls how much the subsets disagree.
// Losses are unnormalized sums: f_k(x) = sum over samples of
// 0.5 * (<x, z> - y)^2 and F(x) = sum_k f_k(x).

#ifndef BYGRAD_DATA_HPP_
#define BYGRAD_DATA_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "bygrad/core.hpp"

namespace bygrad {

struct Sample {
  ModelVector z;
  double y = 0.0;
  bool operator==(const Sample&) const = default;
};

struct Subset {
  std::vector<Sample> samples;
  bool operator==(const Subset&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  // Throws std::invalid_argument for an empty subset list, empty subsets,
  // mixed feature dimensions or non-finite values.
  Dataset(std::vector<Subset> subsets, double sigma_h);

  std::size_t num_subsets() const { return subsets_.size(); }
  std::size_t dim() const { return dim_; }
  double sigma_h() const { return sigma_h_; }
  const Subset& subset(std::size_t k) const;
  const std::vector<Subset>& subsets() const { return subsets_; }

  bool operator==(const Dataset& other) const = default;

 private:
  std::vector<Subset> subsets_;
  std::size_t dim_ = 0;
  double sigma_h_ = 0.0;
};

struct DatasetOptions {
  std::size_t num_subsets = 100;
  std::size_t dim = 100;
  double sigma_h = 0.0;
  std::size_t samples_per_subset = 1;
  double feature_variance = 100.0;
  double label_noise_variance = 1.0;
};

// Deterministic given `rng`; each subset draws from its own derived stream.
Dataset generate_lr_dataset(const RngStream& rng, const DatasetOptions& options);

// Subset k (0-based). Throws std::invalid_argument when k is out of range or
// the model dimension does not match.
double local_loss(const Dataset& data, const ModelVector& x, std::size_t k);
ModelVector local_gradient(const Dataset& data, const ModelVector& x,
                           std::size_t k);

// All N per-subset gradients at x, in subset order.
std::vector<ModelVector> local_gradients(const Dataset& data,
                                         const ModelVector& x);

double full_loss(const Dataset& data, const ModelVector& x);
ModelVector full_gradient(const Dataset& data, const ModelVector& x);
// (1/N) * full gradient.
ModelVector mean_gradient(const Dataset& data, const ModelVector& x);

// Sum of grads[k] for k in `indices`, accumulated left to right in ascending
// index order. Every gradient sum in the library goes through this so that
// equal index sets give bit-identical results.
ModelVector sum_gradients(std::span<const ModelVector> grads,
                          std::span<const std::size_t> sorted_indices);
ModelVector sum_all(std::span<const ModelVector> grads);
// sum_all(grads) * (1/N).
ModelVector average_all(std::span<const ModelVector> grads);

// Empirical heterogeneity (1/N) sum_k ||grad f_k - mu||^2 with mu the average.
double heterogeneity(std::span<const ModelVector> grads);
double heterogeneity(const Dataset& data, const ModelVector& x);
// Largest heterogeneity over a set of probe models.
double estimate_beta_sq(const Dataset& data, std::span<const ModelVector> probes);

// Smoothness constant of F used by the bounds: sum of ||z||^2 over all
// samples (the trace of the Hessian, an upper bound on its largest
// eigenvalue).
double estimate_L(const Dataset& data);

// CSV table with header `k,y,z0,...,z{Q-1}`, one row per sample, k 0-based.
void write_dataset_csv(std::ostream& out, const Dataset& data);
Dataset read_dataset_csv(std::istream& in, double sigma_h = 0.0);

}  // namespace bygrad

#endif  // BYGRAD_DATA_HPP_
