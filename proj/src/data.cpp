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

#include "bygrad/data.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace bygrad {
namespace {

constexpr std::uint64_t kDatasetStream = 0xDA7A;

void check_subset_index(const Dataset& data, std::size_t k) {
  if (k >= data.num_subsets()) {
    throw std::invalid_argument("subset index " + std::to_string(k) +
                                " out of range [0, " +
                                std::to_string(data.num_subsets()) + ")");
  }
}

void check_model_dim(const Dataset& data, const ModelVector& x) {
  if (x.dim() != data.dim()) {
    throw std::invalid_argument("model dimension " + std::to_string(x.dim()) +
                                " does not match dataset dimension " +
                                std::to_string(data.dim()));
  }
}

}  // namespace

Dataset::Dataset(std::vector<Subset> subsets, double sigma_h)
    : subsets_(std::move(subsets)), sigma_h_(sigma_h) {
  if (subsets_.empty()) throw std::invalid_argument("Dataset: no subsets");
  dim_ = 0;
  for (const Subset& s : subsets_) {
    if (s.samples.empty()) throw std::invalid_argument("Dataset: empty subset");
    for (const Sample& sample : s.samples) {
      if (dim_ == 0) dim_ = sample.z.dim();
      if (sample.z.dim() != dim_ || dim_ == 0) {
        throw std::invalid_argument("Dataset: inconsistent feature dimension");
      }
      if (!sample.z.all_finite() || !std::isfinite(sample.y)) {
        throw std::invalid_argument("Dataset: non-finite sample");
      }
    }
  }
}

const Subset& Dataset::subset(std::size_t k) const {
  check_subset_index(*this, k);
  return subsets_[k];
}

Dataset generate_lr_dataset(const RngStream& rng,
                            const DatasetOptions& options) {
  if (options.num_subsets == 0 || options.dim == 0 ||
      options.samples_per_subset == 0) {
    throw std::invalid_argument("generate_lr_dataset: N, Q and samples must be >= 1");
  }
  if (!(options.sigma_h >= 0.0)) {
    throw std::invalid_argument("generate_lr_dataset: sigma_h must be >= 0");
  }
  const double z_std = std::sqrt(options.feature_variance);
  const double noise_std = std::sqrt(options.label_noise_variance);
  std::vector<Subset> subsets(options.num_subsets);
  for (std::size_t k = 0; k < options.num_subsets; ++k) {
    RngStream stream = rng.derive(kDatasetStream, k);
    // Hidden model variance grows with the 1-based subset index.
    const double hidden_std =
        std::sqrt(1.0 + static_cast<double>(k + 1) * options.sigma_h);
    ModelVector hidden(options.dim);
    for (std::size_t q = 0; q < options.dim; ++q) {
      hidden[q] = stream.normal(0.0, hidden_std);
    }
    subsets[k].samples.reserve(options.samples_per_subset);
    for (std::size_t s = 0; s < options.samples_per_subset; ++s) {
      Sample sample{ModelVector(options.dim), 0.0};
      for (std::size_t q = 0; q < options.dim; ++q) {
        sample.z[q] = stream.normal(0.0, z_std);
      }
      sample.y = stream.normal(dot(sample.z, hidden), noise_std);
      subsets[k].samples.push_back(std::move(sample));
    }
  }
  return Dataset(std::move(subsets), options.sigma_h);
}

double local_loss(const Dataset& data, const ModelVector& x, std::size_t k) {
  check_model_dim(data, x);
  double loss = 0.0;
  for (const Sample& s : data.subset(k).samples) {
    const double r = dot(x, s.z) - s.y;
    loss += 0.5 * r * r;
  }
  return loss;
}

ModelVector local_gradient(const Dataset& data, const ModelVector& x,
                           std::size_t k) {
  check_model_dim(data, x);
  ModelVector grad(data.dim());
  for (const Sample& s : data.subset(k).samples) {
    axpy(dot(x, s.z) - s.y, s.z, grad);
  }
  return grad;
}

std::vector<ModelVector> local_gradients(const Dataset& data,
                                         const ModelVector& x) {
  std::vector<ModelVector> grads;
  grads.reserve(data.num_subsets());
  for (std::size_t k = 0; k < data.num_subsets(); ++k) {
    grads.push_back(local_gradient(data, x, k));
  }
  return grads;
}

double full_loss(const Dataset& data, const ModelVector& x) {
  double loss = 0.0;
  for (std::size_t k = 0; k < data.num_subsets(); ++k) {
    loss += local_loss(data, x, k);
  }
  return loss;
}

ModelVector sum_gradients(std::span<const ModelVector> grads,
                          std::span<const std::size_t> sorted_indices) {
  if (sorted_indices.empty()) {
    throw std::invalid_argument("sum_gradients: empty index set");
  }
  ModelVector acc = grads[sorted_indices[0]];
  for (std::size_t j = 1; j < sorted_indices.size(); ++j) {
    acc += grads[sorted_indices[j]];
  }
  return acc;
}

ModelVector sum_all(std::span<const ModelVector> grads) {
  if (grads.empty()) throw std::invalid_argument("sum_all: empty input");
  ModelVector acc = grads[0];
  for (std::size_t k = 1; k < grads.size(); ++k) acc += grads[k];
  return acc;
}

ModelVector average_all(std::span<const ModelVector> grads) {
  return scale(sum_all(grads), 1.0 / static_cast<double>(grads.size()));
}

ModelVector full_gradient(const Dataset& data, const ModelVector& x) {
  return sum_all(local_gradients(data, x));
}

ModelVector mean_gradient(const Dataset& data, const ModelVector& x) {
  return average_all(local_gradients(data, x));
}

double heterogeneity(std::span<const ModelVector> grads) {
  const ModelVector mu = average_all(grads);
  double acc = 0.0;
  for (const ModelVector& g : grads) acc += squared_distance(g, mu);
  return acc / static_cast<double>(grads.size());
}

double heterogeneity(const Dataset& data, const ModelVector& x) {
  return heterogeneity(local_gradients(data, x));
}

double estimate_beta_sq(const Dataset& data,
                        std::span<const ModelVector> probes) {
  double best = 0.0;
  for (const ModelVector& x : probes) {
    best = std::max(best, heterogeneity(data, x));
  }
  return best;
}

double estimate_L(const Dataset& data) {
  double trace = 0.0;
  for (const Subset& s : data.subsets()) {
    for (const Sample& sample : s.samples) trace += squared_norm(sample.z);
  }
  return trace;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "k,y";
  for (std::size_t q = 0; q < data.dim(); ++q) out << ",z" << q;
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < data.num_subsets(); ++k) {
    for (const Sample& s : data.subset(k).samples) {
      out << k << ',';
      put(s.y);
      for (double v : s.z.values()) {
        out << ',';
        put(v);
      }
      out << '\n';
    }
  }
}

Dataset read_dataset_csv(std::istream& in, double sigma_h) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("k,y", 0) != 0) {
    throw std::invalid_argument("dataset CSV: missing `k,y,z0,...` header");
  }
  std::vector<Subset> subsets;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset CSV line " +
                                    std::to_string(line_no) +
                                    ": bad number `" + cell + "`");
      }
    }
    if (cells.size() < 3) {
      throw std::invalid_argument("dataset CSV line " +
                                  std::to_string(line_no) + ": too few columns");
    }
    const auto k = static_cast<std::size_t>(cells[0]);
    if (k > subsets.size()) {
      throw std::invalid_argument("dataset CSV line " +
                                  std::to_string(line_no) +
                                  ": subsets must appear in order");
    }
    if (k == subsets.size()) subsets.emplace_back();
    Sample s;
    s.y = cells[1];
    s.z = ModelVector(std::vector<double>(cells.begin() + 2, cells.end()));
    subsets[k].samples.push_back(std::move(s));
  }
  return Dataset(std::move(subsets), sigma_h);
}

}  // namespace bygrad
