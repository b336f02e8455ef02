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

// Numeric primitives shared by every bygrad module: dense model vectors,
// keyed random streams and permutations.
//
// Index convention: all public APIs are 0-based. Device i, subset k and task
// row r in this library correspond to i+1, k+1 and r+1 in the usual 1-based
// mathematical notation.

#ifndef BYGRAD_CORE_HPP_
#define BYGRAD_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bygrad {

// Raised when an exact enumeration would exceed its configured budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A dense real vector of fixed dimension: a model, a gradient or a message.
class ModelVector {
 public:
  ModelVector() = default;
  explicit ModelVector(std::size_t dim, double fill = 0.0)
      : values_(dim, fill) {}
  explicit ModelVector(std::vector<double> values)
      : values_(std::move(values)) {}
  ModelVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t dim() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double operator[](std::size_t q) const { return values_[q]; }
  double& operator[](std::size_t q) { return values_[q]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& as_vector() const { return values_; }

  bool all_finite() const;

  ModelVector& operator+=(const ModelVector& other);
  ModelVector& operator-=(const ModelVector& other);
  ModelVector& operator*=(double factor);

  bool operator==(const ModelVector& other) const = default;

 private:
  std::vector<double> values_;
};

// Throws std::invalid_argument when the dimensions differ.
void check_same_dim(const ModelVector& a, const ModelVector& b);

ModelVector operator+(ModelVector a, const ModelVector& b);
ModelVector operator-(ModelVector a, const ModelVector& b);
ModelVector operator*(double factor, ModelVector v);
ModelVector scale(ModelVector v, double factor);

double dot(const ModelVector& a, const ModelVector& b);
double squared_norm(const ModelVector& v);
double squared_distance(const ModelVector& a, const ModelVector& b);

// y += alpha * x
void axpy(double alpha, const ModelVector& x, ModelVector& y);

// Incremental mean m_k = m_{k-1} + (v_k - m_{k-1}) / k. Averaging n copies of
// the same vector returns that vector bit-for-bit, which a sum followed by a
// division does not guarantee.
class RunningMean {
 public:
  void add(const ModelVector& v);
  std::size_t count() const { return count_; }
  // Throws std::logic_error when nothing was added.
  const ModelVector& value() const;

 private:
  ModelVector mean_;
  std::size_t count_ = 0;
};

// Counter-based random stream. A stream is identified by a root seed plus a
// chain of derivation labels; the n-th draw is a pure function of
// (key, n), so streams derived for different (entity, iteration) labels are
// independent of evaluation order and may be used from different threads.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed);

  // Child stream keyed by the given labels. Does not advance this stream.
  RngStream derive(std::uint64_t a, std::uint64_t b = 0,
                   std::uint64_t c = 0) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on {0, ..., n-1}; n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  // Standard normal (Box-Muller, one variate per call).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  RngStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// A bijection of {0, ..., n-1}.
class Permutation {
 public:
  Permutation() = default;
  // Throws std::invalid_argument unless `map` is a bijection of {0..n-1}.
  explicit Permutation(std::vector<std::size_t> map);
  static Permutation identity(std::size_t n);

  std::size_t size() const { return map_.size(); }
  std::size_t operator[](std::size_t i) const { return map_[i]; }
  const std::vector<std::size_t>& as_vector() const { return map_; }
  Permutation inverse() const;

  bool operator==(const Permutation& other) const = default;

 private:
  std::vector<std::size_t> map_;
};

// Uniform over all n! permutations (Fisher-Yates). n = 0 is invalid.
Permutation sample_permutation(RngStream& rng, std::size_t n);

// First `count` entries of a uniformly shuffled {0..n-1}, sorted ascending:
// a uniform size-`count` subset.
std::vector<std::size_t> sample_subset(RngStream& rng, std::size_t n,
                                       std::size_t count);

// n! as a double-free integer; throws BudgetExceeded past 20!.
std::uint64_t factorial(std::size_t n);
std::uint64_t binomial(std::size_t n, std::size_t k);

// Calls visit(subset) for every size-k subset of {0..n-1} in lexicographic
// order. Subsets are passed as sorted index vectors.
template <typename Visitor>
void for_each_combination(std::size_t n, std::size_t k, Visitor&& visit) {
  if (k > n) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    visit(static_cast<const std::vector<std::size_t>&>(idx));
    if (k == 0) return;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace bygrad

#endif  // BYGRAD_CORE_HPP_
