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

// Unbiased compressors: E[C(g)] = g and E||C(g) - g||^2 <= delta ||g||^2.

#ifndef BYGRAD_COMPRESSION_HPP_
#define BYGRAD_COMPRESSION_HPP_

#include <cstddef>
#include <string>
#include <string_view>

#include "bygrad/core.hpp"

namespace bygrad {

class Compressor {
 public:
  enum class Kind { kIdentity, kRandomSparsification, kStochasticQuantization };

  static Compressor identity() { return Compressor(Kind::kIdentity, 0); }
  // Keeps `kept` uniformly chosen coordinates, scaled by Q / kept.
  // Throws std::invalid_argument when kept < 1.
  static Compressor random_sparsification(std::size_t kept);
  // Per-vector range [a, b] = [min g, max g]; each entry rounds to a or b
  // with probabilities that preserve its expectation.
  static Compressor stochastic_quantization() {
    return Compressor(Kind::kStochasticQuantization, 0);
  }

  // Accepts `identity`, `sparsify:<kept>` and `stoch_quant`.
  static Compressor parse(std::string_view spec);

  Kind kind() const { return kind_; }
  std::size_t kept() const { return kept_; }
  std::string spec() const;

  bool operator==(const Compressor&) const = default;

 private:
  Compressor(Kind kind, std::size_t kept) : kind_(kind), kept_(kept) {}

  Kind kind_;
  std::size_t kept_;
};

// Throws std::invalid_argument when g has non-finite entries or, for
// sparsification, when kept > dim.
ModelVector compress(const Compressor& c, const ModelVector& g, RngStream& rng);

// Tight delta for vectors of dimension `dim`:
//   identity        0
//   sparsification  dim / kept - 1 (attained by every g)
//   quantization    (dim - 2) / 2, attained by g = (1, -1, 0, ..., 0)
double delta_of(const Compressor& c, std::size_t dim);

// Exact E||C(g) - g||^2 for this particular g.
double expected_squared_error(const Compressor& c, const ModelVector& g);

// Scalars a device uploads per message: identity Q, sparsification
// 2 * kept (index/value pairs), quantization Q symbols + 2 range scalars.
std::size_t uplink_scalars(const Compressor& c, std::size_t dim);

}  // namespace bygrad

#endif  // BYGRAD_COMPRESSION_HPP_
