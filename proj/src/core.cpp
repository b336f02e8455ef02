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

#include "bygrad/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace bygrad {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool ModelVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void check_same_dim(const ModelVector& a, const ModelVector& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("dimension mismatch: " +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()));
  }
}

ModelVector& ModelVector::operator+=(const ModelVector& other) {
  check_same_dim(*this, other);
  for (std::size_t q = 0; q < values_.size(); ++q) values_[q] += other[q];
  return *this;
}

ModelVector& ModelVector::operator-=(const ModelVector& other) {
  check_same_dim(*this, other);
  for (std::size_t q = 0; q < values_.size(); ++q) values_[q] -= other[q];
  return *this;
}

ModelVector& ModelVector::operator*=(double factor) {
  for (double& v : values_) v *= factor;
  return *this;
}

ModelVector operator+(ModelVector a, const ModelVector& b) { return a += b; }
ModelVector operator-(ModelVector a, const ModelVector& b) { return a -= b; }
ModelVector operator*(double factor, ModelVector v) { return v *= factor; }
ModelVector scale(ModelVector v, double factor) { return v *= factor; }

double dot(const ModelVector& a, const ModelVector& b) {
  check_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t q = 0; q < a.dim(); ++q) acc += a[q] * b[q];
  return acc;
}

double squared_norm(const ModelVector& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x * x;
  return acc;
}

double squared_distance(const ModelVector& a, const ModelVector& b) {
  check_same_dim(a, b);
  double acc = 0.0;
  for (std::size_t q = 0; q < a.dim(); ++q) {
    const double diff = a[q] - b[q];
    acc += diff * diff;
  }
  return acc;
}

void axpy(double alpha, const ModelVector& x, ModelVector& y) {
  check_same_dim(x, y);
  auto out = y.values();
  auto in = x.values();
  for (std::size_t q = 0; q < out.size(); ++q) out[q] += alpha * in[q];
}

void RunningMean::add(const ModelVector& v) {
  ++count_;
  if (count_ == 1) {
    mean_ = v;
    return;
  }
  check_same_dim(mean_, v);
  const double inv = 1.0 / static_cast<double>(count_);
  for (std::size_t q = 0; q < v.dim(); ++q) {
    mean_[q] += (v[q] - mean_[q]) * inv;
  }
}

const ModelVector& RunningMean::value() const {
  if (count_ == 0) throw std::logic_error("RunningMean: no samples");
  return mean_;
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), key_(mix64(seed)) {}

RngStream RngStream::derive(std::uint64_t a, std::uint64_t b,
                            std::uint64_t c) const {
  std::uint64_t k = key_;
  k = mix64(k ^ mix64(a + 1 * kGolden));
  k = mix64(k ^ mix64(b + 2 * kGolden));
  k = mix64(k ^ mix64(c + 3 * kGolden));
  return RngStream(seed_, k);
}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

__extension__ typedef unsigned __int128 u128;

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Lemire's multiply-and-reject, unbiased.
  u128 m = static_cast<u128>((*this)()) * static_cast<u128>(n);
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<u128>((*this)()) * static_cast<u128>(n);
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

Permutation::Permutation(std::vector<std::size_t> map) : map_(std::move(map)) {
  std::vector<bool> seen(map_.size(), false);
  for (std::size_t v : map_) {
    if (v >= map_.size() || seen[v]) {
      throw std::invalid_argument("Permutation: not a bijection of {0..n-1}");
    }
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = i;
  return Permutation(std::move(map));
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = i;
  return Permutation(std::move(inv));
}

Permutation sample_permutation(RngStream& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample_permutation: n must be >= 1");
  std::vector<std::size_t> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i + 1));
    std::swap(map[i], map[j]);
  }
  return Permutation(std::move(map));
}

std::vector<std::size_t> sample_subset(RngStream& rng, std::size_t n,
                                       std::size_t count) {
  if (count > n) throw std::invalid_argument("sample_subset: count > n");
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::uint64_t factorial(std::size_t n) {
  if (n > 20) throw BudgetExceeded("factorial: n! overflows 64 bits");
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= i;
  return f;
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  u128 r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) {
      throw BudgetExceeded("binomial: value overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(r);
}

}  // namespace bygrad
