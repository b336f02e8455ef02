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

// Cyclic computation-task matrix, per-iteration task assignment and the
// gradient encoder run by every device.

#ifndef BYGRAD_CODING_HPP_
#define BYGRAD_CODING_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bygrad/core.hpp"
#include "bygrad/data.hpp"

namespace bygrad {

// N x N binary matrix in which every row has exactly d ones. Row r lists the
// d (permuted) subset slots that task r covers. Stored as sorted column
// lists.
class TaskMatrix {
 public:
  // Throws std::invalid_argument unless every row holds exactly d distinct
  // columns in [0, n).
  TaskMatrix(std::size_t n, std::size_t d,
             std::vector<std::vector<std::size_t>> rows);

  // Row 0 has ones in columns 0..d-1 and row r is row r-1 shifted right by
  // one (cyclically), so every column also sums to d.
  static TaskMatrix cyclic(std::size_t n, std::size_t d);
  // Each row an independent uniform d-subset of the columns.
  static TaskMatrix random_row_regular(RngStream& rng, std::size_t n,
                                       std::size_t d);

  std::size_t size() const { return n_; }
  std::size_t load() const { return d_; }
  const std::vector<std::size_t>& row(std::size_t r) const { return rows_.at(r); }
  bool at(std::size_t r, std::size_t k) const;
  std::vector<std::size_t> column_sums() const;
  bool has_uniform_columns() const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<std::vector<std::size_t>> rows_;
};

// Throws std::invalid_argument unless 1 <= d <= n.
TaskMatrix build_cyclic_matrix(std::size_t n, std::size_t d);

// One iteration's randomness: device i runs task row task_indices[i], and
// column k of a task refers to subset data_perm[k].
struct Assignment {
  Permutation task_indices;
  Permutation data_perm;
};

// Two independent uniform permutations of {0..n-1}.
Assignment sample_assignment(RngStream& rng, std::size_t n);

// The d subsets (ascending) whose gradients device i combines.
std::vector<std::size_t> selected_subsets(std::size_t device,
                                          const Assignment& assignment,
                                          const TaskMatrix& matrix);

// Coded vector g_i = (1/d) * sum of the d selected local gradients at x.
// Computes exactly d local gradients.
ModelVector encode(std::size_t device, const Assignment& assignment,
                   const ModelVector& x, const Dataset& data,
                   const TaskMatrix& matrix);

// Same value as encode(), reading precomputed per-subset gradients.
ModelVector encode_from_gradients(std::size_t device,
                                  const Assignment& assignment,
                                  std::span<const ModelVector> grads,
                                  const TaskMatrix& matrix);

struct EncoderMoments {
  ModelVector mean;            // E[g_i]
  double second_moment = 0.0;  // E||g_i||^2
  double variance = 0.0;       // E||g_i - mu||^2, mu = average gradient
  std::size_t samples = 0;
  bool exact = false;
  // Monte Carlo only: standard error of `variance` and the largest
  // per-coordinate standard error of `mean`.
  double variance_stderr = 0.0;
  double mean_stderr_max = 0.0;
};

inline constexpr std::size_t kMaxExactEncoderN = 8;

// Moments of a device's coded vector over the assignment randomness.
// Exact mode enumerates all N! data permutations times the N task rows a
// device can receive; throws BudgetExceeded when N > kMaxExactEncoderN.
EncoderMoments encoder_moments_exact(std::span<const ModelVector> grads,
                                     const TaskMatrix& matrix);
EncoderMoments encoder_moments_monte_carlo(std::span<const ModelVector> grads,
                                           const TaskMatrix& matrix,
                                           std::size_t num_samples,
                                           RngStream& rng);

// Closed-form E||g_i - mu||^2 = (1/(N d)) (N-d)/(N-1) sum_k ||grad_k - mu||^2.
double encoder_variance_closed_form(std::span<const ModelVector> grads,
                                    std::size_t d);

}  // namespace bygrad

#endif  // BYGRAD_CODING_HPP_
