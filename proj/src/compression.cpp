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

#include "bygrad/compression.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace bygrad {

Compressor Compressor::random_sparsification(std::size_t kept) {
  if (kept < 1) {
    throw std::invalid_argument("sparsification must keep at least 1 coordinate");
  }
  return Compressor(Kind::kRandomSparsification, kept);
}

Compressor Compressor::parse(std::string_view spec) {
  if (spec == "identity" || spec == "none") return identity();
  if (spec == "stoch_quant") return stochastic_quantization();
  constexpr std::string_view kSparsify = "sparsify:";
  if (spec.starts_with(kSparsify)) {
    const std::string_view arg = spec.substr(kSparsify.size());
    long long kept = 0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), kept);
    if (ec != std::errc() || ptr != arg.data() + arg.size() || kept < 1) {
      throw std::invalid_argument("bad sparsification count in `" +
                                  std::string(spec) + "`");
    }
    return random_sparsification(static_cast<std::size_t>(kept));
  }
  throw std::invalid_argument("unknown compressor `" + std::string(spec) +
                              "` (expected identity, sparsify:<k>, stoch_quant)");
}

std::string Compressor::spec() const {
  switch (kind_) {
    case Kind::kIdentity:
      return "identity";
    case Kind::kRandomSparsification:
      return "sparsify:" + std::to_string(kept_);
    case Kind::kStochasticQuantization:
      return "stoch_quant";
  }
  return "identity";
}

ModelVector compress(const Compressor& c, const ModelVector& g, RngStream& rng) {
  if (!g.all_finite()) throw std::invalid_argument("compress: non-finite input");
  const std::size_t dim = g.dim();
  switch (c.kind()) {
    case Compressor::Kind::kIdentity:
      return g;
    case Compressor::Kind::kRandomSparsification: {
      if (c.kept() > dim) {
        throw std::invalid_argument("sparsification keeps " +
                                    std::to_string(c.kept()) +
                                    " of only " + std::to_string(dim) +
                                    " coordinates");
      }
      const double factor =
          static_cast<double>(dim) / static_cast<double>(c.kept());
      ModelVector out(dim);
      for (std::size_t q : sample_subset(rng, dim, c.kept())) {
        out[q] = g[q] * factor;
      }
      return out;
    }
    case Compressor::Kind::kStochasticQuantization: {
      if (dim == 0) return g;
      const auto [lo_it, hi_it] = std::minmax_element(g.values().begin(),
                                                      g.values().end());
      const double a = *lo_it;
      const double b = *hi_it;
      if (a == b) return g;
      ModelVector out(dim);
      for (std::size_t q = 0; q < dim; ++q) {
        const double p_upper = (g[q] - a) / (b - a);
        out[q] = rng.uniform() < p_upper ? b : a;
      }
      return out;
    }
  }
  return g;
}

double delta_of(const Compressor& c, std::size_t dim) {
  switch (c.kind()) {
    case Compressor::Kind::kIdentity:
      return 0.0;
    case Compressor::Kind::kRandomSparsification:
      if (c.kept() > dim) {
        throw std::invalid_argument("sparsification keeps more than dim");
      }
      return static_cast<double>(dim) / static_cast<double>(c.kept()) - 1.0;
    case Compressor::Kind::kStochasticQuantization:
      return dim <= 2 ? 0.0 : (static_cast<double>(dim) - 2.0) / 2.0;
  }
  throw std::invalid_argument("delta_of: unsupported compressor");
}

double expected_squared_error(const Compressor& c, const ModelVector& g) {
  switch (c.kind()) {
    case Compressor::Kind::kIdentity:
      return 0.0;
    case Compressor::Kind::kRandomSparsification:
      return delta_of(c, g.dim()) * squared_norm(g);
    case Compressor::Kind::kStochasticQuantization: {
      if (g.dim() == 0) return 0.0;
      const auto [lo_it, hi_it] = std::minmax_element(g.values().begin(),
                                                      g.values().end());
      double acc = 0.0;
      for (double v : g.values()) acc += (*hi_it - v) * (v - *lo_it);
      return acc;
    }
  }
  return 0.0;
}

std::size_t uplink_scalars(const Compressor& c, std::size_t dim) {
  switch (c.kind()) {
    case Compressor::Kind::kIdentity:
      return dim;
    case Compressor::Kind::kRandomSparsification:
      return 2 * c.kept();
    case Compressor::Kind::kStochasticQuantization:
      return dim + 2;
  }
  return dim;
}

}  // namespace bygrad
