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

#include <sstream>

#include "bygrad/sim.hpp"
#include "test_util.hpp"

namespace bygrad {
namespace {

ExperimentConfig small(Method m = Method::kLad) {
  ExperimentConfig c;
  c.method = m;
  c.num_devices = 20;
  c.num_honest = 15;
  c.load = 4;
  c.dim = 8;
  c.iterations = 30;
  c.gamma = 1e-4;
  c.sigma_h = 0.3;
  return c;
}

TEST(Method, NamesRoundTrip) {
  for (Method m : {Method::kLad, Method::kComLad, Method::kBaselineVa, Method::kBaselineCwtm,
                   Method::kBaselineCwtmNnm, Method::kBaselineComTgn, Method::kOracle}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW((void)parse_method("SGD"), std::invalid_argument);
  EXPECT_TRUE(is_baseline(Method::kBaselineVa));
  EXPECT_FALSE(is_baseline(Method::kLad));
}

TEST(Config, ValidationNamesTheField) {
  auto expect_field = [](ExperimentConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << "expected failure on " << field;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("`" + field + "`"), std::string::npos) << e.what();
    }
  };
  ExperimentConfig c = small();
  c.num_honest = 10;
  expect_field(c, "H");
  c = small();
  c.load = 21;
  expect_field(c, "d");
  c = small();
  c.gamma = -1;
  expect_field(c, "gamma");
  c = small();
  c.compressor = "sparsify:2";
  expect_field(c, "compressor");
  c = small(Method::kComLad);
  c.compressor = "sparsify:9";
  expect_field(c, "compressor");
  c = small();
  c.byzantine_count = 6;
  expect_field(c, "byzantine_count");
  c = small(Method::kBaselineCwtm);
  c.aggregator = "mean";
  expect_field(c, "aggregator");
  EXPECT_NO_THROW(small().validate());
}

TEST(Config, EffectiveValues) {
  ExperimentConfig c = small(Method::kBaselineVa);
  EXPECT_EQ(c.effective_load(), 1u);
  EXPECT_EQ(c.effective_byzantine_count(), 5u);
  EXPECT_EQ(c.effective_aggregator().kind(), Aggregator::Kind::kMean);
  c.method = Method::kBaselineCwtmNnm;
  const Aggregator a = c.effective_aggregator();
  EXPECT_EQ(a.kind(), Aggregator::Kind::kNnm);
  EXPECT_EQ(a.byzantine_budget(), 5u);
  EXPECT_EQ(small().effective_aggregator().spec(), Aggregator::cwtm(0.1).spec());
}

TEST(Config, HashAndFileName) {
  ExperimentConfig a = small(), b = small();
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(run_file_name(a), "LAD-" + config_hash(a) + ".csv");
}

TEST(Run, DeterministicPerSeed) {
  const RunRecord a = run(small()), b = run(small());
  ASSERT_EQ(a.rows.size(), 31u);
  EXPECT_EQ(a.final_model, b.final_model);
  for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].loss, b.rows[i].loss);
  ExperimentConfig c = small();
  c.seed = 9;
  EXPECT_NE(run(c).final_model, a.final_model);
}

TEST(Run, ParallelDevicesMatchSerial) {
  ExperimentConfig c = small(Method::kComLad);
  c.compressor = "sparsify:3";
  const RunRecord serial = run(c);
  c.device_threads = 3;
  EXPECT_EQ(run(c).final_model, serial.final_model);
}

TEST(Run, IdentityCompressorReducesToLad) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ExperimentConfig lad = small();
    lad.seed = seed;
    ExperimentConfig com = lad;
    com.method = Method::kComLad;
    const RunRecord a = run(lad), b = run(com);
    EXPECT_EQ(a.final_model, b.final_model);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].loss, b.rows[i].loss);
  }
}

TEST(Run, FullLoadMeanWithoutByzantinesIsOracle) {
  for (std::uint64_t seed : {1u, 5u}) {
    ExperimentConfig c = small();
    c.seed = seed;
    c.load = c.num_devices;
    c.byzantine_count = 0;
    c.aggregator = "mean";
    ExperimentConfig o = c;
    o.method = Method::kOracle;
    o.aggregator.clear();
    const RunRecord a = run(c), b = run(o);
    EXPECT_EQ(a.final_model, b.final_model);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].loss, b.rows[i].loss);
  }
}

TEST(Run, ZeroGammaKeepsModel) {
  ExperimentConfig c = small();
  c.gamma = 0.0;
  c.x0 = 0.25;
  const RunRecord r = run(c);
  EXPECT_EQ(r.final_model, ModelVector(8, 0.25));
  EXPECT_EQ(r.rows.front().loss, r.rows.back().loss);
}

TEST(Run, UplinkAccounting) {
  const RunRecord lad = run(small());
  EXPECT_EQ(lad.rows.front().uplink_scalars, 8u);
  ExperimentConfig c = small(Method::kComLad);
  c.compressor = "sparsify:3";
  EXPECT_EQ(run(c).rows.front().uplink_scalars, 6u);
  EXPECT_EQ(run(c).rows.back().uplink_scalars, 0u);
}

TEST(Run, LogStrideKeepsFinalRow) {
  ExperimentConfig c = small();
  c.log_stride = 7;
  const RunRecord r = run(c);
  std::vector<std::size_t> ts;
  for (const auto& row : r.rows) ts.push_back(row.t);
  EXPECT_EQ(ts, (std::vector<std::size_t>{0, 7, 14, 21, 28, 30}));
}

TEST(Run, DivergenceIsFlagged) {
  ExperimentConfig c = small(Method::kBaselineVa);
  c.gamma = 1.0;
  c.attack = "signflip:-50";
  const RunRecord r = run(c);
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.rows.back().t, 30u);
}

TEST(Protocol, UnbiasedWithoutByzantines) {
  ExperimentConfig c = small();
  c.byzantine_count = 0;
  c.aggregator = "mean";
  const Protocol p(c);
  const ModelVector x(8, 0.1);
  const auto grads = local_gradients(p.dataset(), x);
  const ModelVector mu = average_all(grads);
  RunningMean m;
  const std::uint64_t T = 20000;
  std::vector<double> sq(8, 0.0);
  for (std::uint64_t t = 0; t < T; ++t) {
    const ModelVector a = p.step(x, grads, t).aggregate;
    m.add(a);
    for (std::size_t q = 0; q < 8; ++q) sq[q] += (a[q] - mu[q]) * (a[q] - mu[q]);
  }
  for (std::size_t q = 0; q < 8; ++q) {
    const double se = std::sqrt(sq[q] / T / T);
    EXPECT_NEAR(m.value()[q], mu[q], 5 * se + 1e-12);
  }
}

TEST(Protocol, HonestMessagesUntouchedAndPartition) {
  ExperimentConfig c = small();
  c.schedule = "resample";
  const Protocol p(c);
  const ModelVector x(8, 0.0);
  const auto grads = local_gradients(p.dataset(), x);
  for (std::uint64_t t = 0; t < 5; ++t) {
    const StepResult s = p.step(x, grads, t);
    EXPECT_EQ(s.byzantine.size(), 5u);
    EXPECT_GE(s.deviation_sq, 0.0);
  }
}

TEST(Sweep, ParallelEqualsSerialAndCapturesErrors) {
  std::vector<ExperimentConfig> cs;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    ExperimentConfig c = small();
    c.seed = s;
    cs.push_back(c);
  }
  cs[2].num_honest = 5;  // invalid
  const auto serial = sweep(cs, 1);
  const auto par = sweep(cs, 3);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    EXPECT_EQ(serial[i].final_model, par[i].final_model);
    EXPECT_EQ(serial[i].error.empty(), i != 2);
  }
}

TEST(RunCsv, RoundTrip) {
  const RunRecord r = run(small());
  std::stringstream s;
  write_run_csv(s, r);
  const auto rows = read_run_csv(s);
  ASSERT_EQ(rows.size(), r.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].t, r.rows[i].t);
    EXPECT_EQ(rows[i].loss, r.rows[i].loss);
    EXPECT_EQ(rows[i].agg_deviation_sq, r.rows[i].agg_deviation_sq);
  }
  std::stringstream bad("t,loss\n0,1\n");
  EXPECT_THROW((void)read_run_csv(bad), std::invalid_argument);
}

}  // namespace
}  // namespace bygrad
