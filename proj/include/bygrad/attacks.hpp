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

// Byzantine device behaviors and the per-iteration choice of which devices
// are Byzantine.

#ifndef BYGRAD_ATTACKS_HPP_
#define BYGRAD_ATTACKS_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bygrad/core.hpp"

namespace bygrad {

class AttackPolicy {
 public:
  enum class Kind { kNone, kSignFlip, kConstant, kGaussianNoise, kOpposite };

  // Payload equals the honest message.
  static AttackPolicy none();
  static AttackPolicy sign_flip(double coefficient);
  // Every coordinate set to `value`.
  static AttackPolicy constant(double value);
  // Honest message plus N(0, scale^2) noise per coordinate.
  static AttackPolicy gaussian_noise(double scale);
  // Points against the honest mean of the round: -scale * mean over the
  // messages supplied as context. Requires the context to be provided.
  static AttackPolicy opposite(double scale = 1.0);

  // `none`, `signflip:<c>`, `const:<v>`, `gauss:<s>`, `opposite[:<s>]`.
  static AttackPolicy parse(std::string_view spec);

  Kind kind() const { return kind_; }
  double parameter() const { return parameter_; }
  // Payloads whose norm exceeds this, or that are non-finite, are clipped.
  double max_norm() const { return max_norm_; }
  AttackPolicy with_max_norm(double max_norm) const;
  std::string spec() const;

  bool operator==(const AttackPolicy& other) const = default;

 private:
  AttackPolicy(Kind kind, double parameter) : kind_(kind), parameter_(parameter) {}

  Kind kind_ = Kind::kNone;
  double parameter_ = 0.0;
  double max_norm_ = 1e150;
};

struct Payload {
  ModelVector message;
  bool clipped = false;
};

// What a Byzantine device transmits in place of `honest_msg`, its own
// pre-compression coded vector. `honest_mean` is only read by kOpposite.
Payload byzantine_payload(const AttackPolicy& policy, const ModelVector& honest_msg,
                          const ModelVector* honest_mean, RngStream& rng);

class ByzantineSchedule {
 public:
  enum class Mode { kFixed, kResample };

  // The same set every iteration.
  static ByzantineSchedule fixed(std::vector<std::size_t> devices);
  // Devices 0..count-1 every iteration.
  static ByzantineSchedule fixed_first(std::size_t count);
  // A fresh uniform size-`count` subset every iteration.
  static ByzantineSchedule resample(std::size_t count);

  // `fixed` and `resample` use the given default count.
  static ByzantineSchedule parse(std::string_view spec, std::size_t count);

  Mode mode() const { return mode_; }
  std::size_t count() const { return count_; }
  const std::vector<std::size_t>& fixed_set() const { return fixed_; }
  std::string spec() const;

 private:
  ByzantineSchedule(Mode mode, std::size_t count) : mode_(mode), count_(count) {}

  Mode mode_;
  std::size_t count_;
  std::vector<std::size_t> fixed_;
};

// Sorted Byzantine device indices for iteration t. Throws
// std::invalid_argument when the set would exceed N - H or name a device
// outside {0..N-1}. The resample draw comes from rng.derive(tag, t).
std::vector<std::size_t> select_byzantine_set(const ByzantineSchedule& schedule,
                                              std::size_t num_devices,
                                              std::size_t num_honest,
                                              std::uint64_t t, const RngStream& rng);

// Complement of a sorted Byzantine set in {0..N-1}.
std::vector<std::size_t> honest_complement(const std::vector<std::size_t>& byzantine,
                                           std::size_t num_devices);

}  // namespace bygrad

#endif  // BYGRAD_ATTACKS_HPP_
