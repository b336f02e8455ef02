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

#include "bygrad/coding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace bygrad {
namespace {

// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class MomentAccumulator {
 public:
  MomentAccumulator(const ModelVector& mu) : mu_(mu), mean_(mu.dim()), sq_(mu.dim()) {}

  void add(const ModelVector& g) {
    double norm_sq = 0.0;
    double dev_sq = 0.0;
    for (std::size_t q = 0; q < g.dim(); ++q) {
      mean_[q].add(g[q]);
      const double diff = g[q] - mu_[q];
      sq_[q].add(diff * diff);
      norm_sq += g[q] * g[q];
      dev_sq += diff * diff;
    }
    second_.add(norm_sq);
    dev_.add(dev_sq);
    dev_sq_sum_.add(dev_sq * dev_sq);
    ++count_;
  }

  EncoderMoments finish(bool exact) const {
    EncoderMoments m;
    const double n = static_cast<double>(count_);
    m.mean = ModelVector(mu_.dim());
    for (std::size_t q = 0; q < mu_.dim(); ++q) m.mean[q] = mean_[q].value() / n;
    m.second_moment = second_.value() / n;
    m.variance = dev_.value() / n;
    m.samples = count_;
    m.exact = exact;
    if (!exact && count_ > 1) {
      const double var_of_dev =
          std::max(0.0, dev_sq_sum_.value() / n - m.variance * m.variance);
      m.variance_stderr = std::sqrt(var_of_dev / (n - 1.0));
      for (std::size_t q = 0; q < mu_.dim(); ++q) {
        // Coordinate variance about mu, minus the squared bias.
        const double bias = m.mean[q] - mu_[q];
        const double var_q = std::max(0.0, sq_[q].value() / n - bias * bias);
        m.mean_stderr_max =
            std::max(m.mean_stderr_max, std::sqrt(var_q / (n - 1.0)));
      }
    }
    return m;
  }

 private:
  ModelVector mu_;
  std::vector<CompensatedSum> mean_;
  std::vector<CompensatedSum> sq_;
  CompensatedSum second_;
  CompensatedSum dev_;
  CompensatedSum dev_sq_sum_;
  std::size_t count_ = 0;
};

ModelVector encode_row(std::size_t row, const Permutation& data_perm,
                       std::span<const ModelVector> grads,
                       const TaskMatrix& matrix) {
  std::vector<std::size_t> subsets;
  subsets.reserve(matrix.load());
  for (std::size_t k : matrix.row(row)) subsets.push_back(data_perm[k]);
  std::sort(subsets.begin(), subsets.end());
  return scale(sum_gradients(grads, subsets),
               1.0 / static_cast<double>(matrix.load()));
}

void check_assignment(const Assignment& a, const TaskMatrix& matrix,
                      std::size_t device) {
  if (a.task_indices.size() != matrix.size() ||
      a.data_perm.size() != matrix.size()) {
    throw std::invalid_argument("assignment size does not match task matrix");
  }
  if (device >= matrix.size()) {
    throw std::invalid_argument("device index " + std::to_string(device) +
                                " out of range");
  }
}

}  // namespace

TaskMatrix::TaskMatrix(std::size_t n, std::size_t d,
                       std::vector<std::vector<std::size_t>> rows)
    : n_(n), d_(d), rows_(std::move(rows)) {
  if (d_ < 1 || d_ > n_) {
    throw std::invalid_argument("TaskMatrix: need 1 <= d <= N (d=" +
                                std::to_string(d_) + ", N=" +
                                std::to_string(n_) + ")");
  }
  if (rows_.size() != n_) throw std::invalid_argument("TaskMatrix: need N rows");
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end());
    if (row.size() != d_ ||
        std::adjacent_find(row.begin(), row.end()) != row.end() ||
        row.back() >= n_) {
      throw std::invalid_argument(
          "TaskMatrix: every row needs exactly d distinct columns in [0, N)");
    }
  }
}

TaskMatrix TaskMatrix::cyclic(std::size_t n, std::size_t d) {
  if (d < 1 || d > n) {
    throw std::invalid_argument("cyclic matrix: need 1 <= d <= N (d=" +
                                std::to_string(d) + ", N=" + std::to_string(n) +
                                ")");
  }
  std::vector<std::vector<std::size_t>> rows(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) rows[r].push_back((r + j) % n);
  }
  return TaskMatrix(n, d, std::move(rows));
}

TaskMatrix TaskMatrix::random_row_regular(RngStream& rng, std::size_t n,
                                          std::size_t d) {
  if (d < 1 || d > n) throw std::invalid_argument("need 1 <= d <= N");
  std::vector<std::vector<std::size_t>> rows(n);
  for (std::size_t r = 0; r < n; ++r) rows[r] = sample_subset(rng, n, d);
  return TaskMatrix(n, d, std::move(rows));
}

bool TaskMatrix::at(std::size_t r, std::size_t k) const {
  const auto& cols = rows_.at(r);
  return std::binary_search(cols.begin(), cols.end(), k);
}

std::vector<std::size_t> TaskMatrix::column_sums() const {
  std::vector<std::size_t> sums(n_, 0);
  for (const auto& row : rows_) {
    for (std::size_t k : row) ++sums[k];
  }
  return sums;
}

bool TaskMatrix::has_uniform_columns() const {
  const auto sums = column_sums();
  return std::all_of(sums.begin(), sums.end(),
                     [this](std::size_t s) { return s == d_; });
}

TaskMatrix build_cyclic_matrix(std::size_t n, std::size_t d) {
  return TaskMatrix::cyclic(n, d);
}

Assignment sample_assignment(RngStream& rng, std::size_t n) {
  Permutation tasks = sample_permutation(rng, n);
  Permutation data = sample_permutation(rng, n);
  return Assignment{std::move(tasks), std::move(data)};
}

std::vector<std::size_t> selected_subsets(std::size_t device,
                                          const Assignment& assignment,
                                          const TaskMatrix& matrix) {
  check_assignment(assignment, matrix, device);
  std::vector<std::size_t> subsets;
  for (std::size_t k : matrix.row(assignment.task_indices[device])) {
    subsets.push_back(assignment.data_perm[k]);
  }
  std::sort(subsets.begin(), subsets.end());
  return subsets;
}

ModelVector encode(std::size_t device, const Assignment& assignment,
                   const ModelVector& x, const Dataset& data,
                   const TaskMatrix& matrix) {
  if (data.num_subsets() != matrix.size()) {
    throw std::invalid_argument("dataset has " +
                                std::to_string(data.num_subsets()) +
                                " subsets but task matrix is " +
                                std::to_string(matrix.size()) + " wide");
  }
  const auto subsets = selected_subsets(device, assignment, matrix);
  ModelVector acc = local_gradient(data, x, subsets[0]);
  for (std::size_t j = 1; j < subsets.size(); ++j) {
    acc += local_gradient(data, x, subsets[j]);
  }
  return scale(std::move(acc), 1.0 / static_cast<double>(matrix.load()));
}

ModelVector encode_from_gradients(std::size_t device,
                                  const Assignment& assignment,
                                  std::span<const ModelVector> grads,
                                  const TaskMatrix& matrix) {
  check_assignment(assignment, matrix, device);
  if (grads.size() != matrix.size()) {
    throw std::invalid_argument("gradient count does not match task matrix");
  }
  return encode_row(assignment.task_indices[device], assignment.data_perm,
                    grads, matrix);
}

EncoderMoments encoder_moments_exact(std::span<const ModelVector> grads,
                                     const TaskMatrix& matrix) {
  const std::size_t n = matrix.size();
  if (grads.size() != n) {
    throw std::invalid_argument("gradient count does not match task matrix");
  }
  if (n > kMaxExactEncoderN) {
    throw BudgetExceeded("exact encoder enumeration needs N <= " +
                         std::to_string(kMaxExactEncoderN) + " (N=" +
                         std::to_string(n) + ")");
  }
  MomentAccumulator acc(average_all(grads));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    const Permutation p(perm);
    for (std::size_t row = 0; row < n; ++row) {
      acc.add(encode_row(row, p, grads, matrix));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return acc.finish(true);
}

EncoderMoments encoder_moments_monte_carlo(std::span<const ModelVector> grads,
                                           const TaskMatrix& matrix,
                                           std::size_t num_samples,
                                           RngStream& rng) {
  const std::size_t n = matrix.size();
  if (grads.size() != n) {
    throw std::invalid_argument("gradient count does not match task matrix");
  }
  if (num_samples < 2) throw std::invalid_argument("need at least 2 samples");
  MomentAccumulator acc(average_all(grads));
  for (std::size_t s = 0; s < num_samples; ++s) {
    const Assignment a = sample_assignment(rng, n);
    acc.add(encode_row(a.task_indices[0], a.data_perm, grads, matrix));
  }
  return acc.finish(false);
}

double encoder_variance_closed_form(std::span<const ModelVector> grads,
                                    std::size_t d) {
  const std::size_t n = grads.size();
  if (d < 1 || d > n) throw std::invalid_argument("need 1 <= d <= N");
  if (d == n) return 0.0;
  const double spread = heterogeneity(grads) * static_cast<double>(n);
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  return spread / (nn * dd) * ((nn - dd) / (nn - 1.0));
}

}  // namespace bygrad
