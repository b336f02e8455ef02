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

#include <gtest/gtest.h>

#include <set>

#include "bygrad/attacks.hpp"
#include "test_util.hpp"

namespace bygrad {
namespace {

TEST(AttackPolicy, ParseAndSpec) {
  EXPECT_EQ(AttackPolicy::parse("signflip:-2"), AttackPolicy::sign_flip(-2.0));
  EXPECT_EQ(AttackPolicy::parse("none"), AttackPolicy::none());
  EXPECT_EQ(AttackPolicy::parse("const:3"), AttackPolicy::constant(3.0));
  EXPECT_EQ(AttackPolicy::parse("gauss:10"), AttackPolicy::gaussian_noise(10.0));
  EXPECT_EQ(AttackPolicy::parse("opposite"), AttackPolicy::opposite(1.0));
  for (const char* s : {"none", "signflip:-2", "const:3", "gauss:10", "opposite:2"}) {
    EXPECT_EQ(AttackPolicy::parse(AttackPolicy::parse(s).spec()), AttackPolicy::parse(s));
  }
  for (const char* bad : {"", "signflip", "flip:-2", "gauss:-1", "const:x"}) {
    EXPECT_THROW((void)AttackPolicy::parse(bad), std::invalid_argument) << bad;
  }
}

TEST(Payload, SignFlipScalesHonestMessage) {
  RngStream rng(1);
  const ModelVector g{1.0, -3.0};
  const Payload p = byzantine_payload(AttackPolicy::sign_flip(-2.0), g, nullptr, rng);
  EXPECT_EQ(p.message, (ModelVector{-2.0, 6.0}));
  EXPECT_FALSE(p.clipped);
}

TEST(Payload, NoneConstantOpposite) {
  RngStream rng(2);
  const ModelVector g{1.0, 2.0};
  const ModelVector mean{0.5, -1.0};
  EXPECT_EQ(byzantine_payload(AttackPolicy::none(), g, nullptr, rng).message, g);
  EXPECT_EQ(byzantine_payload(AttackPolicy::constant(7.0), g, nullptr, rng).message,
            (ModelVector{7.0, 7.0}));
  EXPECT_EQ(byzantine_payload(AttackPolicy::opposite(2.0), g, &mean, rng).message,
            (ModelVector{-1.0, 2.0}));
  EXPECT_THROW((void)byzantine_payload(AttackPolicy::opposite(), g, nullptr, rng),
               std::invalid_argument);
}

TEST(Payload, GaussianNoiseIsSeeded) {
  const ModelVector g(50, 1.0);
  RngStream a(3), b(3);
  const auto pa = byzantine_payload(AttackPolicy::gaussian_noise(5.0), g, nullptr, a);
  const auto pb = byzantine_payload(AttackPolicy::gaussian_noise(5.0), g, nullptr, b);
  EXPECT_EQ(pa.message, pb.message);
  EXPECT_NE(pa.message, g);
}

TEST(Payload, ClipsToMaxNormAndStaysFinite) {
  RngStream rng(4);
  const ModelVector g{3.0, 4.0};
  const auto p = byzantine_payload(AttackPolicy::sign_flip(-1e10).with_max_norm(10.0), g,
                                   nullptr, rng);
  EXPECT_TRUE(p.clipped);
  EXPECT_NEAR(std::sqrt(squared_norm(p.message)), 10.0, 1e-12);
  const auto q = byzantine_payload(AttackPolicy::sign_flip(-1e300), ModelVector{1e300, 1.0},
                                   nullptr, rng);
  EXPECT_TRUE(q.message.all_finite());
  EXPECT_TRUE(q.clipped);
}

TEST(Schedule, FixedFirstAndExplicit) {
  const RngStream rng(1);
  const auto s = ByzantineSchedule::fixed_first(3);
  EXPECT_EQ(select_byzantine_set(s, 10, 7, 0, rng), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(select_byzantine_set(s, 10, 7, 99, rng), (std::vector<std::size_t>{0, 1, 2}));
  const auto e = ByzantineSchedule::fixed({7, 2});
  EXPECT_EQ(e.fixed_set(), (std::vector<std::size_t>{2, 7}));
  EXPECT_THROW((void)ByzantineSchedule::fixed({1, 1}), std::invalid_argument);
  EXPECT_THROW((void)select_byzantine_set(s, 10, 8, 0, rng), std::invalid_argument);
}

TEST(Schedule, ResampleIsPartitionAndDeterministic) {
  const RngStream rng(5);
  const auto s = ByzantineSchedule::resample(4);
  std::set<std::vector<std::size_t>> distinct;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto byz = select_byzantine_set(s, 12, 8, t, rng);
    EXPECT_EQ(byz, select_byzantine_set(s, 12, 8, t, rng));
    ASSERT_EQ(byz.size(), 4u);
    const auto honest = honest_complement(byz, 12);
    EXPECT_EQ(honest.size(), 8u);
    std::set<std::size_t> all(byz.begin(), byz.end());
    all.insert(honest.begin(), honest.end());
    EXPECT_EQ(all.size(), 12u);
    distinct.insert(byz);
  }
  EXPECT_GT(distinct.size(), 10u);
}

TEST(Schedule, ParseAndSpec) {
  EXPECT_EQ(ByzantineSchedule::parse("fixed", 3).mode(), ByzantineSchedule::Mode::kFixed);
  EXPECT_EQ(ByzantineSchedule::parse("resample", 3).count(), 3u);
  EXPECT_THROW((void)ByzantineSchedule::parse("random", 3), std::invalid_argument);
}

}  // namespace
}  // namespace bygrad
