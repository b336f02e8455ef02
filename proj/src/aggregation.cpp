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

#include "bygrad/aggregation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace bygrad {
namespace {

double parse_fraction(std::string_view text, std::string_view spec) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad number in aggregator `" +
                                std::string(spec) + "`");
  }
  return value;
}

void validate_messages(std::span<const ModelVector> msgs) {
  if (msgs.empty()) throw std::invalid_argument("aggregate: no messages");
  for (const ModelVector& m : msgs) {
    check_same_dim(msgs[0], m);
    if (!m.all_finite()) {
      throw std::invalid_argument("aggregate: non-finite message rejected");
    }
  }
}

ModelVector mean_of(std::span<const ModelVector> msgs) {
  RunningMean acc;
  for (const ModelVector& m : msgs) acc.add(m);
  return acc.value();
}

ModelVector trimmed_mean(std::span<const ModelVector> msgs, double alpha) {
  const std::size_t n = msgs.size();
  const std::size_t trim = fraction_count(alpha, n);
  if (2 * trim >= n) {
    throw std::invalid_argument("cwtm: trimming " + std::to_string(trim) +
                                " per side leaves no values out of " +
                                std::to_string(n));
  }
  const std::size_t dim = msgs[0].dim();
  ModelVector out(dim);
  std::vector<double> column(n);
  for (std::size_t q = 0; q < dim; ++q) {
    for (std::size_t i = 0; i < n; ++i) column[i] = msgs[i][q];
    std::sort(column.begin(), column.end());
    double mean = column[trim];
    std::size_t count = 1;
    for (std::size_t j = trim + 1; j < n - trim; ++j) {
      ++count;
      mean += (column[j] - mean) / static_cast<double>(count);
    }
    out[q] = mean;
  }
  return out;
}

ModelVector norm_thresholded_mean(std::span<const ModelVector> msgs, double tau) {
  const std::size_t n = msgs.size();
  const std::size_t drop = fraction_count(tau, n);
  if (drop >= n) {
    throw std::invalid_argument("tgn: dropping " + std::to_string(drop) +
                                " of " + std::to_string(n) + " messages");
  }
  std::vector<std::pair<double, std::size_t>> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = {squared_norm(msgs[i]), i};
  std::sort(norms.begin(), norms.end());
  std::vector<std::size_t> kept(n - drop);
  for (std::size_t j = 0; j < n - drop; ++j) kept[j] = norms[j].second;
  std::sort(kept.begin(), kept.end());
  RunningMean acc;
  for (std::size_t i : kept) acc.add(msgs[i]);
  return acc.value();
}

}  // namespace

std::size_t fraction_count(double fraction, std::size_t n) {
  if (!(fraction >= 0.0)) throw std::invalid_argument("negative fraction");
  const double raw = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

Aggregator Aggregator::mean() { return Aggregator(Kind::kMean, 0.0); }

Aggregator Aggregator::cwtm(double trim_fraction) {
  if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
    throw std::invalid_argument("cwtm trim fraction must be in [0, 0.5)");
  }
  return Aggregator(Kind::kCwtm, trim_fraction);
}

Aggregator Aggregator::tgn(double drop_fraction) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0)) {
    throw std::invalid_argument("tgn drop fraction must be in [0, 1)");
  }
  return Aggregator(Kind::kTgn, drop_fraction);
}

Aggregator Aggregator::nnm(Aggregator inner,
                           std::optional<std::size_t> byzantine_budget) {
  if (inner.kind() == Kind::kNnm) {
    throw std::invalid_argument("nnm cannot wrap another nnm");
  }
  Aggregator a(Kind::kNnm, 0.0);
  a.budget_ = byzantine_budget;
  a.inner_ = std::make_shared<const Aggregator>(std::move(inner));
  return a;
}

const Aggregator& Aggregator::inner() const {
  if (!inner_) throw std::logic_error("aggregator has no inner rule");
  return *inner_;
}

Aggregator Aggregator::with_budget(std::size_t f) const {
  Aggregator copy = *this;
  if (copy.kind_ == Kind::kNnm && !copy.budget_) copy.budget_ = f;
  return copy;
}

Aggregator Aggregator::with_declared_kappa(double kappa) const {
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  Aggregator copy = *this;
  copy.declared_kappa_ = kappa;
  return copy;
}

Aggregator Aggregator::parse(std::string_view spec) {
  if (spec == "mean") return mean();
  constexpr std::string_view kNnm = "nnm+";
  if (spec.starts_with(kNnm)) {
    std::string_view rest = spec.substr(kNnm.size());
    std::optional<std::size_t> budget;
    const auto f_pos = rest.rfind(":f=");
    if (f_pos != std::string_view::npos) {
      const std::string_view f_text = rest.substr(f_pos + 3);
      long long f = -1;
      auto [ptr, ec] =
          std::from_chars(f_text.data(), f_text.data() + f_text.size(), f);
      if (ec != std::errc() || ptr != f_text.data() + f_text.size() || f < 0) {
        throw std::invalid_argument("bad byzantine budget in `" +
                                    std::string(spec) + "`");
      }
      budget = static_cast<std::size_t>(f);
      rest = rest.substr(0, f_pos);
    } else if (rest.starts_with("f=") || rest.find(":f=") != std::string_view::npos) {
      throw std::invalid_argument("malformed nnm spec `" + std::string(spec) + "`");
    }
    return nnm(parse(rest), budget);
  }
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  if (colon != std::string_view::npos && (name == "cwtm" || name == "tgn")) {
    const double value = parse_fraction(spec.substr(colon + 1), spec);
    return name == "cwtm" ? cwtm(value) : tgn(value);
  }
  throw std::invalid_argument(
      "unknown aggregator `" + std::string(spec) +
      "` (expected mean, cwtm:<a>, tgn:<t>, nnm+<inner>:f=<f>)");
}

std::string Aggregator::spec() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::kMean:
      out << "mean";
      break;
    case Kind::kCwtm:
      out << "cwtm:" << fraction_;
      break;
    case Kind::kTgn:
      out << "tgn:" << fraction_;
      break;
    case Kind::kNnm:
      out << "nnm+" << inner().spec();
      if (budget_) out << ":f=" << *budget_;
      break;
  }
  return out.str();
}

std::vector<ModelVector> nearest_neighbor_mixing(std::span<const ModelVector> msgs,
                                                 std::size_t byzantine_budget) {
  validate_messages(msgs);
  const std::size_t n = msgs.size();
  if (byzantine_budget >= n) {
    throw std::invalid_argument("nnm: budget f=" + std::to_string(byzantine_budget) +
                                " leaves no neighbors among " + std::to_string(n));
  }
  const std::size_t keep = n - byzantine_budget;
  const std::size_t dim = msgs[0].dim();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* a = msgs[i].values().data();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* b = msgs[j].values().data();
      // Four partial sums so the loop vectorises.
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t q = 0;
      for (; q + 4 <= dim; q += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
          const double diff = a[q + l] - b[q + l];
          acc[l] += diff * diff;
        }
      }
      for (; q < dim; ++q) {
        const double diff = a[q] - b[q];
        acc[0] += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
  }
  std::vector<ModelVector> mixed;
  mixed.reserve(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const double* row = &dist[i * n];
    // Self first at distance zero, then by distance, ties by lower index.
    if (keep < n) {
      std::nth_element(order.begin(), order.begin() + static_cast<long>(keep),
                       order.end(), [&](std::size_t a, std::size_t b) {
                         if (row[a] != row[b]) return row[a] < row[b];
                         if ((a == i) != (b == i)) return a == i;
                         return a < b;
                       });
    }
    std::sort(order.begin(), order.begin() + static_cast<long>(keep));
    // Incremental mean over the neighbors in index order, as RunningMean.
    ModelVector mean = msgs[order[0]];
    double* m = mean.values().data();
    for (std::size_t j = 1; j < keep; ++j) {
      const double* v = msgs[order[j]].values().data();
      const double inv = 1.0 / static_cast<double>(j + 1);
      for (std::size_t q = 0; q < dim; ++q) m[q] += (v[q] - m[q]) * inv;
    }
    mixed.push_back(std::move(mean));
  }
  return mixed;
}

ModelVector aggregate(const Aggregator& agg, std::span<const ModelVector> msgs) {
  validate_messages(msgs);
  switch (agg.kind()) {
    case Aggregator::Kind::kMean:
      return mean_of(msgs);
    case Aggregator::Kind::kCwtm:
      return trimmed_mean(msgs, agg.fraction());
    case Aggregator::Kind::kTgn:
      return norm_thresholded_mean(msgs, agg.fraction());
    case Aggregator::Kind::kNnm: {
      if (!agg.byzantine_budget()) {
        throw std::invalid_argument("nnm: byzantine budget f not set");
      }
      const auto mixed = nearest_neighbor_mixing(msgs, *agg.byzantine_budget());
      return aggregate(agg.inner(), mixed);
    }
  }
  throw std::logic_error("unreachable aggregator kind");
}

double robustness_ratio(const Aggregator& agg,
                        std::span<const ModelVector> honest,
                        std::span<const ModelVector> byzantine) {
  if (honest.empty()) throw std::invalid_argument("robustness_ratio: no honest vectors");
  const ModelVector zbar = mean_of(honest);
  double spread = 0.0;
  for (const ModelVector& z : honest) spread += squared_distance(z, zbar);
  spread /= static_cast<double>(honest.size());
  std::vector<ModelVector> all(honest.begin(), honest.end());
  all.insert(all.end(), byzantine.begin(), byzantine.end());
  const double deviation = squared_distance(aggregate(agg, all), zbar);
  if (spread == 0.0) {
    return deviation == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return deviation / spread;
}

KappaEstimate estimate_kappa(const Aggregator& agg, const KappaOptions& options,
                             RngStream& rng) {
  const std::size_t n = options.num_devices;
  const std::size_t h = options.num_honest;
  if (h > n || 2 * h <= n) {
    throw std::invalid_argument("estimate_kappa: need N/2 < H <= N");
  }
  if (options.dim == 0 || options.num_trials == 0) {
    throw std::invalid_argument("estimate_kappa: dim and trials must be positive");
  }
  const Aggregator rule = agg.with_budget(n - h);
  const std::size_t f = n - h;
  const std::size_t dim = options.dim;

  KappaEstimate best;
  best.num_trials = options.num_trials;
  std::vector<ModelVector> honest(h, ModelVector(dim));
  std::vector<ModelVector> byz(f, ModelVector(dim));

  for (std::size_t trial = 0; trial < options.num_trials; ++trial) {
    RngStream s = rng.derive(0x4B41, trial);
    const double center_scale = std::pow(10.0, -1.0 + 2.0 * s.uniform());
    ModelVector center(dim);
    for (std::size_t q = 0; q < dim; ++q) center[q] = s.normal(0.0, center_scale);
    for (auto& z : honest) {
      for (std::size_t q = 0; q < dim; ++q) z[q] = center[q] + s.normal();
    }
    const ModelVector zbar = mean_of(honest);

    AdversaryPolicy policy = options.policy;
    int variant = 0;
    if (policy == AdversaryPolicy::kMixed) variant = static_cast<int>(s.uniform_index(4));
    std::ostringstream label;
    if (policy == AdversaryPolicy::kCopyHonest) {
      for (std::size_t j = 0; j < f; ++j) byz[j] = honest[s.uniform_index(h)];
      label << "copy-honest";
    } else if (policy == AdversaryPolicy::kNormEscalating || variant == 1) {
      const double magnitude = std::pow(10.0, 8.0 * s.uniform());
      ModelVector u(dim);
      for (std::size_t q = 0; q < dim; ++q) u[q] = s.normal();
      u *= magnitude / std::sqrt(std::max(squared_norm(u), 1e-300));
      for (auto& b : byz) b = zbar + u;
      label << "collude at honest mean + " << magnitude << " * unit";
    } else if (variant == 0) {
      const double coeff = -1.0 - 4.0 * s.uniform();
      for (std::size_t j = 0; j < f; ++j) byz[j] = scale(honest[j % h], coeff);
      label << "sign flip x" << coeff;
    } else if (variant == 2) {
      const double shift = 3.0 * s.uniform();
      for (auto& b : byz) {
        b = zbar;
        for (std::size_t q = 0; q < dim; ++q) b[q] += shift;
      }
      label << "coordinate shift " << shift;
    } else {
      const double noise = std::pow(10.0, 4.0 * s.uniform());
      for (auto& b : byz) {
        for (std::size_t q = 0; q < dim; ++q) b[q] = zbar[q] + s.normal(0.0, noise);
      }
      label << "gaussian noise " << noise;
    }

    const double ratio = robustness_ratio(rule, honest, byz);
    if (ratio > best.kappa_hat || trial == 0) {
      best.kappa_hat = std::max(best.kappa_hat, ratio);
      best.worst_case_config = "trial " + std::to_string(trial) + ": " + label.str();
    }
  }
  best.unbounded = !std::isfinite(best.kappa_hat) ||
                   best.kappa_hat > options.unbounded_threshold;
  return best;
}

}  // namespace bygrad
