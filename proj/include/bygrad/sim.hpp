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

// Training loops: LAD, Com-LAD, the non-redundant baselines and an
// adversary-free exact-gradient oracle.

#ifndef BYGRAD_SIM_HPP_
#define BYGRAD_SIM_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bygrad/aggregation.hpp"
#include "bygrad/attacks.hpp"
#include "bygrad/coding.hpp"
#include "bygrad/compression.hpp"
#include "bygrad/core.hpp"
#include "bygrad/data.hpp"

namespace bygrad {

enum class Method {
  kLad,
  kComLad,
  kBaselineVa,
  kBaselineCwtm,
  kBaselineCwtmNnm,
  kBaselineComTgn,
  kOracle,
};

// Names used in configs and CSV manifests: LAD, ComLAD, VA, CWTM, CWTM_NNM,
// ComTGN, oracle.
std::string_view method_name(Method m);
Method parse_method(std::string_view name);
bool is_baseline(Method m);

struct ExperimentConfig {
  Method method = Method::kLad;
  std::size_t num_devices = 100;  // N, also the number of data subsets
  std::size_t num_honest = 80;    // H
  std::size_t load = 1;           // d
  std::size_t dim = 100;          // Q
  std::size_t iterations = 1000;  // T
  double gamma = 1e-6;
  double sigma_h = 0.0;
  // Empty means the method default: cwtm:0.1 for LAD/ComLAD, the matching
  // rule for a baseline.
  std::string aggregator;
  std::string compressor = "identity";
  std::string attack = "signflip:-2";
  std::string schedule = "fixed";
  // Defaults to N - H.
  std::optional<std::size_t> byzantine_count;
  std::uint64_t seed = 1;
  // Seed for the synthetic dataset; defaults to `seed`.
  std::optional<std::uint64_t> data_seed;
  // Every coordinate of x^0.
  double x0 = 0.0;
  std::size_t log_stride = 1;
  // Devices evaluated by this many threads inside an iteration.
  std::size_t device_threads = 1;
  double divergence_guard = 1e30;

  // Throws std::invalid_argument with a message naming the field.
  void validate() const;
  // Load after baseline forcing (d = 1 for every baseline).
  std::size_t effective_load() const;
  std::size_t effective_byzantine_count() const;
  Aggregator effective_aggregator() const;

  // Stable `key=value;...` text of every field; the basis of config_hash.
  std::string canonical() const;
};

// 16 hex digits (FNV-1a of canonical()).
std::string config_hash(const ExperimentConfig& config);
// `<method>-<hash>.csv`
std::string run_file_name(const ExperimentConfig& config);

struct IterationRecord {
  std::size_t t = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  // ||g^t - gbar^t||^2, gbar^t the mean of the honest (possibly compressed)
  // messages. The final row, which has no update, reports 0.
  double agg_deviation_sq = 0.0;
  // Scalars uploaded by each honest device at iteration t; 0 on the final row.
  std::size_t uplink_scalars = 0;
};

struct RunRecord {
  ExperimentConfig config;
  // Rows for t = 0, stride, 2*stride, ... and always t = T; T+1 rows at
  // stride 1 unless the run diverged.
  std::vector<IterationRecord> rows;
  ModelVector final_model;
  bool diverged = false;
  std::size_t clipped_payloads = 0;
  // Set by sweep() when the run threw; rows are then empty.
  std::string error;

  double final_loss() const;
};

// Everything one iteration produced at a frozen model.
struct StepResult {
  ModelVector aggregate;
  ModelVector honest_mean;
  std::vector<std::size_t> byzantine;
  double deviation_sq = 0.0;
  // (1/H) sum over honest i of ||msg_i - honest_mean||^2.
  double honest_variance = 0.0;
  std::size_t uplink_scalars = 0;
  std::size_t clipped_payloads = 0;
};

// The per-iteration protocol of a configuration, usable step by step.
class Protocol {
 public:
  // Generates the synthetic dataset from the config.
  explicit Protocol(const ExperimentConfig& config);
  Protocol(const ExperimentConfig& config, Dataset data);

  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return data_; }
  const TaskMatrix& matrix() const { return matrix_; }
  const Aggregator& aggregator() const { return aggregator_; }
  const Compressor& compressor() const { return compressor_; }

  // Iteration t at model x. `grads` are the per-subset gradients at x.
  StepResult step(const ModelVector& x, std::span<const ModelVector> grads,
                  std::uint64_t t) const;

 private:
  void check_dataset() const;
  void fill_messages(const ModelVector& x, std::span<const ModelVector> grads,
                     const Assignment& assignment,
                     const std::vector<bool>& is_byzantine,
                     const ModelVector* honest_raw_mean, std::uint64_t t,
                     std::vector<ModelVector>& msgs,
                     std::vector<unsigned char>& clipped) const;

  ExperimentConfig config_;
  Dataset data_;
  TaskMatrix matrix_;
  Aggregator aggregator_;
  Compressor compressor_;
  AttackPolicy attack_;
  ByzantineSchedule schedule_;
  RngStream root_;
};

// Each throws std::invalid_argument if config.method is not one it runs.
RunRecord run_lad(const ExperimentConfig& config);
RunRecord run_com_lad(const ExperimentConfig& config);
RunRecord run_baseline(const ExperimentConfig& config);
// Dispatch on config.method.
RunRecord run(const ExperimentConfig& config);
// Runs against a caller-provided dataset.
RunRecord run(const ExperimentConfig& config, const Dataset& data);

// Runs every config on up to `jobs` threads. Output order matches input
// order; a failing config yields a record with `error` set.
std::vector<RunRecord> sweep(const std::vector<ExperimentConfig>& configs,
                             std::size_t jobs = 1);

// Header `t,loss,grad_norm_sq,agg_deviation_sq,uplink_scalars`.
void write_run_csv(std::ostream& out, const RunRecord& record);
std::vector<IterationRecord> read_run_csv(std::istream& in);

}  // namespace bygrad

#endif  // BYGRAD_SIM_HPP_
