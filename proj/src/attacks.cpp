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

#include "bygrad/attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bygrad {
namespace {

constexpr std::uint64_t kByzantineTag = 0xB12A;

double parse_number(std::string_view text, std::string_view spec) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("bad number in attack `" + std::string(spec) + "`");
  }
  return value;
}

}  // namespace

AttackPolicy AttackPolicy::none() { return AttackPolicy(Kind::kNone, 0.0); }

AttackPolicy AttackPolicy::sign_flip(double coefficient) {
  if (!std::isfinite(coefficient)) throw std::invalid_argument("sign flip coefficient must be finite");
  return AttackPolicy(Kind::kSignFlip, coefficient);
}

AttackPolicy AttackPolicy::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("constant attack value must be finite");
  return AttackPolicy(Kind::kConstant, value);
}

AttackPolicy AttackPolicy::gaussian_noise(double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("gaussian attack scale must be finite and >= 0");
  }
  return AttackPolicy(Kind::kGaussianNoise, scale);
}

AttackPolicy AttackPolicy::opposite(double scale) {
  if (!std::isfinite(scale)) throw std::invalid_argument("opposite attack scale must be finite");
  return AttackPolicy(Kind::kOpposite, scale);
}

AttackPolicy AttackPolicy::with_max_norm(double max_norm) const {
  if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be positive");
  AttackPolicy copy = *this;
  copy.max_norm_ = max_norm;
  return copy;
}

AttackPolicy AttackPolicy::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const bool has_arg = colon != std::string_view::npos;
  const std::string_view arg = has_arg ? spec.substr(colon + 1) : std::string_view{};
  if (name == "none" && !has_arg) return none();
  if (name == "opposite") return opposite(has_arg ? parse_number(arg, spec) : 1.0);
  if (has_arg) {
    if (name == "signflip") return sign_flip(parse_number(arg, spec));
    if (name == "const") return constant(parse_number(arg, spec));
    if (name == "gauss") return gaussian_noise(parse_number(arg, spec));
  }
  throw std::invalid_argument("unknown attack `" + std::string(spec) +
                              "` (expected none, signflip:<c>, const:<v>, "
                              "gauss:<s>, opposite[:<s>])");
}

std::string AttackPolicy::spec() const {
  std::ostringstream out;
  switch (kind_) {
    case Kind::kNone: out << "none"; break;
    case Kind::kSignFlip: out << "signflip:" << parameter_; break;
    case Kind::kConstant: out << "const:" << parameter_; break;
    case Kind::kGaussianNoise: out << "gauss:" << parameter_; break;
    case Kind::kOpposite: out << "opposite:" << parameter_; break;
  }
  return out.str();
}

Payload byzantine_payload(const AttackPolicy& policy, const ModelVector& honest_msg,
                          const ModelVector* honest_mean, RngStream& rng) {
  Payload out;
  switch (policy.kind()) {
    case AttackPolicy::Kind::kNone:
      out.message = honest_msg;
      break;
    case AttackPolicy::Kind::kSignFlip:
      out.message = scale(honest_msg, policy.parameter());
      break;
    case AttackPolicy::Kind::kConstant:
      out.message = ModelVector(honest_msg.dim(), policy.parameter());
      break;
    case AttackPolicy::Kind::kGaussianNoise:
      out.message = honest_msg;
      for (std::size_t q = 0; q < out.message.dim(); ++q) {
        out.message[q] += rng.normal(0.0, policy.parameter());
      }
      break;
    case AttackPolicy::Kind::kOpposite:
      if (honest_mean == nullptr) {
        throw std::invalid_argument("opposite attack needs the honest mean");
      }
      check_same_dim(honest_msg, *honest_mean);
      out.message = scale(*honest_mean, -policy.parameter());
      break;
  }

  if (!out.message.all_finite()) {
    // Replace non-finite coordinates by the largest finite value of the same
    // sign, then fall through to the norm clip below.
    for (std::size_t q = 0; q < out.message.dim(); ++q) {
      double& v = out.message[q];
      if (std::isnan(v)) v = 0.0;
      else if (std::isinf(v)) v = v > 0 ? policy.max_norm() : -policy.max_norm();
    }
    out.clipped = true;
  }
  double norm = 0.0;
  for (double v : out.message.values()) norm = std::hypot(norm, v);
  if (norm > policy.max_norm()) {
    out.message *= policy.max_norm() / norm;
    out.clipped = true;
  }
  return out;
}

ByzantineSchedule ByzantineSchedule::fixed(std::vector<std::size_t> devices) {
  std::sort(devices.begin(), devices.end());
  if (std::adjacent_find(devices.begin(), devices.end()) != devices.end()) {
    throw std::invalid_argument("fixed Byzantine set has duplicate devices");
  }
  ByzantineSchedule s(Mode::kFixed, devices.size());
  s.fixed_ = std::move(devices);
  return s;
}

ByzantineSchedule ByzantineSchedule::fixed_first(std::size_t count) {
  std::vector<std::size_t> devices(count);
  for (std::size_t i = 0; i < count; ++i) devices[i] = i;
  return fixed(std::move(devices));
}

ByzantineSchedule ByzantineSchedule::resample(std::size_t count) {
  return ByzantineSchedule(Mode::kResample, count);
}

ByzantineSchedule ByzantineSchedule::parse(std::string_view spec, std::size_t count) {
  if (spec == "fixed") return fixed_first(count);
  if (spec == "resample") return resample(count);
  throw std::invalid_argument("unknown Byzantine schedule `" + std::string(spec) +
                              "` (expected fixed or resample)");
}

std::string ByzantineSchedule::spec() const {
  return mode_ == Mode::kFixed ? "fixed" : "resample";
}

std::vector<std::size_t> select_byzantine_set(const ByzantineSchedule& schedule,
                                              std::size_t num_devices,
                                              std::size_t num_honest,
                                              std::uint64_t t, const RngStream& rng) {
  if (num_honest > num_devices) {
    throw std::invalid_argument("more honest devices than devices");
  }
  if (schedule.count() > num_devices - num_honest) {
    throw std::invalid_argument("Byzantine count " + std::to_string(schedule.count()) +
                                " exceeds N - H = " +
                                std::to_string(num_devices - num_honest));
  }
  if (schedule.mode() == ByzantineSchedule::Mode::kFixed) {
    for (std::size_t i : schedule.fixed_set()) {
      if (i >= num_devices) {
        throw std::invalid_argument("Byzantine device " + std::to_string(i) +
                                    " out of range");
      }
    }
    return schedule.fixed_set();
  }
  RngStream stream = rng.derive(kByzantineTag, t);
  return sample_subset(stream, num_devices, schedule.count());
}

std::vector<std::size_t> honest_complement(const std::vector<std::size_t>& byzantine,
                                           std::size_t num_devices) {
  std::vector<std::size_t> honest;
  honest.reserve(num_devices - std::min(num_devices, byzantine.size()));
  std::size_t j = 0;
  for (std::size_t i = 0; i < num_devices; ++i) {
    if (j < byzantine.size() && byzantine[j] == i) {
      ++j;
    } else {
      honest.push_back(i);
    }
  }
  return honest;
}

}  // namespace bygrad
