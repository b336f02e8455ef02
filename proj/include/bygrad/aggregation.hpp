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

// Server-side aggregation rules and an empirical robustness-coefficient
// estimator.
//
// A rule is kappa-robust when, for any H honest vectors z_1..z_H and any
// N-H arbitrary vectors,
//   ||agg(all) - zbar||^2 <= kappa * (1/H) sum_i ||z_i - zbar||^2,
// with zbar the honest mean.

#ifndef BYGRAD_AGGREGATION_HPP_
#define BYGRAD_AGGREGATION_HPP_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bygrad/core.hpp"

namespace bygrad {

class Aggregator {
 public:
  enum class Kind { kMean, kCwtm, kNnm, kTgn };

  static Aggregator mean();
  // Coordinate-wise trimmed mean: per coordinate drop the ceil(alpha N)
  // largest and ceil(alpha N) smallest values and average the rest.
  static Aggregator cwtm(double trim_fraction);
  // Drop the ceil(tau N) messages with the largest norms, average the rest.
  static Aggregator tgn(double drop_fraction);
  // Nearest-neighbor mixing: replace every message by the mean of its N - f
  // nearest messages (Euclidean, itself included), then apply `inner`.
  // Without a budget the caller must supply one via with_budget().
  static Aggregator nnm(Aggregator inner,
                        std::optional<std::size_t> byzantine_budget = {});

  // Accepts `mean`, `cwtm:<alpha>`, `tgn:<tau>` and `nnm+<inner>[:f=<f>]`,
  // e.g. `nnm+cwtm:0.1:f=20`.
  static Aggregator parse(std::string_view spec);

  Kind kind() const { return kind_; }
  double fraction() const { return fraction_; }
  std::optional<std::size_t> byzantine_budget() const { return budget_; }
  const Aggregator& inner() const;
  std::optional<double> declared_kappa() const { return declared_kappa_; }

  // Copy with the NNM budget filled in where it is unset.
  Aggregator with_budget(std::size_t f) const;
  Aggregator with_declared_kappa(double kappa) const;

  std::string spec() const;

 private:
  Aggregator(Kind kind, double fraction) : kind_(kind), fraction_(fraction) {}

  Kind kind_;
  double fraction_ = 0.0;
  std::optional<std::size_t> budget_;
  std::shared_ptr<const Aggregator> inner_;
  std::optional<double> declared_kappa_;
};

// ceil(fraction * n), robust to representation error in `fraction`.
std::size_t fraction_count(double fraction, std::size_t n);

// Throws std::invalid_argument for an empty input, mixed dimensions,
// non-finite entries, or parameters that would discard every message.
ModelVector aggregate(const Aggregator& agg, std::span<const ModelVector> msgs);

std::vector<ModelVector> nearest_neighbor_mixing(std::span<const ModelVector> msgs,
                                                 std::size_t byzantine_budget);

// ||agg(honest ++ byzantine) - zbar||^2 / ((1/H) sum ||z_i - zbar||^2).
// Returns 0 when both are zero and +inf when only the variance is zero.
double robustness_ratio(const Aggregator& agg,
                        std::span<const ModelVector> honest,
                        std::span<const ModelVector> byzantine);

enum class AdversaryPolicy {
  // Byzantine devices repeat honest vectors.
  kCopyHonest,
  // All Byzantine vectors sit at zbar + s u for a random unit u, with the
  // scale s drawn log-uniformly up to 1e8 honest standard deviations.
  kNormEscalating,
  // Per trial one of: sign flip of honest vectors, escalating collusion,
  // a small coordinated coordinate shift, large Gaussian noise.
  kMixed,
};

struct KappaOptions {
  std::size_t num_devices = 100;
  std::size_t num_honest = 90;
  std::size_t dim = 10;
  std::size_t num_trials = 10000;
  AdversaryPolicy policy = AdversaryPolicy::kMixed;
  // kappa_hat above this is reported as unbounded.
  double unbounded_threshold = 1e6;
};

struct KappaEstimate {
  double kappa_hat = 0.0;
  std::size_t num_trials = 0;
  std::string worst_case_config;
  bool unbounded = false;
};

// Max of the robustness ratio over random trials; a lower bound on the true
// coefficient. Throws std::invalid_argument unless H > N/2.
KappaEstimate estimate_kappa(const Aggregator& agg, const KappaOptions& options,
                             RngStream& rng);

}  // namespace bygrad

#endif  // BYGRAD_AGGREGATION_HPP_
