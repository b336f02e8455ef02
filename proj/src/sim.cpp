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

#include "bygrad/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bygrad {
namespace {

constexpr std::uint64_t kDataTag = 0xDA7A5EED;
constexpr std::uint64_t kAssignTag = 0xA551;
constexpr std::uint64_t kCompressTag = 0xC0DE;
constexpr std::uint64_t kAttackTag = 0xA77A;

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::kLad, "LAD"},
    {Method::kComLad, "ComLAD"},
    {Method::kBaselineVa, "VA"},
    {Method::kBaselineCwtm, "CWTM"},
    {Method::kBaselineCwtmNnm, "CWTM_NNM"},
    {Method::kBaselineComTgn, "ComTGN"},
    {Method::kOracle, "oracle"},
};

[[noreturn]] void bad_config(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field `" + field + "`: " + why);
}

// Default rule for each baseline and the kind it must have.
Aggregator baseline_aggregator(Method m, std::size_t byzantine_budget) {
  switch (m) {
    case Method::kBaselineVa:
      return Aggregator::mean();
    case Method::kBaselineCwtm:
      return Aggregator::cwtm(0.1);
    case Method::kBaselineCwtmNnm:
      return Aggregator::nnm(Aggregator::cwtm(0.1), byzantine_budget);
    case Method::kBaselineComTgn:
      return Aggregator::tgn(0.2);
    default:
      return Aggregator::cwtm(0.1);
  }
}

bool same_shape(const Aggregator& a, const Aggregator& b) {
  if (a.kind() != b.kind()) return false;
  if (a.kind() == Aggregator::Kind::kNnm) return same_shape(a.inner(), b.inner());
  return true;
}

}  // namespace

std::string_view method_name(Method m) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == m) return entry.name;
  }
  throw std::logic_error("unknown method enum");
}

Method parse_method(std::string_view name) {
  for (const auto& entry : kMethodNames) {
    if (entry.name == name) return entry.method;
  }
  throw std::invalid_argument("unknown method `" + std::string(name) +
                              "` (expected LAD, ComLAD, VA, CWTM, CWTM_NNM, "
                              "ComTGN or oracle)");
}

bool is_baseline(Method m) {
  return m == Method::kBaselineVa || m == Method::kBaselineCwtm ||
         m == Method::kBaselineCwtmNnm || m == Method::kBaselineComTgn;
}

std::size_t ExperimentConfig::effective_load() const {
  return is_baseline(method) ? 1 : load;
}

std::size_t ExperimentConfig::effective_byzantine_count() const {
  return byzantine_count.value_or(num_devices - num_honest);
}

Aggregator ExperimentConfig::effective_aggregator() const {
  const std::size_t f = num_devices - num_honest;
  if (aggregator.empty()) return baseline_aggregator(method, f);
  Aggregator parsed = Aggregator::parse(aggregator).with_budget(f);
  if (is_baseline(method) && !same_shape(parsed, baseline_aggregator(method, f))) {
    bad_config("aggregator", "`" + aggregator + "` does not match baseline " +
                                 std::string(method_name(method)));
  }
  return parsed;
}

void ExperimentConfig::validate() const {
  if (num_devices < 1) bad_config("N", "must be >= 1");
  if (num_honest > num_devices) bad_config("H", "must not exceed N");
  if (2 * num_honest <= num_devices) bad_config("H", "must exceed N/2");
  if (!is_baseline(method) && (load < 1 || load > num_devices)) {
    bad_config("d", "must satisfy 1 <= d <= N");
  }
  if (dim < 1) bad_config("Q", "must be >= 1");
  if (iterations < 1) bad_config("T", "must be >= 1");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) bad_config("gamma", "must be finite and >= 0");
  if (!(sigma_h >= 0.0)) bad_config("sigma_H", "must be >= 0");
  if (log_stride < 1) bad_config("log_stride", "must be >= 1");
  if (device_threads < 1) bad_config("device_threads", "must be >= 1");
  if (!(divergence_guard > 0.0)) bad_config("divergence_guard", "must be positive");
  if (effective_byzantine_count() > num_devices - num_honest) {
    bad_config("byzantine_count", "must not exceed N - H");
  }
  try {
    (void)effective_aggregator();
  } catch (const std::invalid_argument& e) {
    bad_config("aggregator", e.what());
  }
  Compressor c = Compressor::identity();
  try {
    c = Compressor::parse(compressor);
  } catch (const std::invalid_argument& e) {
    bad_config("compressor", e.what());
  }
  if (c.kind() == Compressor::Kind::kRandomSparsification && c.kept() > dim) {
    bad_config("compressor", "keeps more coordinates than Q");
  }
  if (method == Method::kLad && c.kind() != Compressor::Kind::kIdentity) {
    bad_config("compressor", "LAD sends uncompressed messages; use ComLAD");
  }
  try {
    (void)AttackPolicy::parse(attack);
    (void)ByzantineSchedule::parse(schedule, 0);
  } catch (const std::invalid_argument& e) {
    bad_config("attack/schedule", e.what());
  }
}

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "method=" << method_name(method) << ";N=" << num_devices
      << ";H=" << num_honest << ";d=" << effective_load() << ";Q=" << dim
      << ";T=" << iterations << ";gamma=" << gamma << ";sigma_H=" << sigma_h
      << ";aggregator=" << aggregator << ";compressor=" << compressor
      << ";attack=" << attack << ";schedule=" << schedule
      << ";byzantine_count=" << effective_byzantine_count() << ";seed=" << seed
      << ";data_seed=" << data_seed.value_or(seed) << ";x0=" << x0
      << ";log_stride=" << log_stride << ";divergence_guard=" << divergence_guard;
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string run_file_name(const ExperimentConfig& config) {
  return std::string(method_name(config.method)) + "-" + config_hash(config) + ".csv";
}

double RunRecord::final_loss() const {
  if (rows.empty()) throw std::logic_error("run record has no rows");
  return rows.back().loss;
}

Protocol::Protocol(const ExperimentConfig& config)
    : Protocol(config,
               [&config] {
                 DatasetOptions opts;
                 opts.num_subsets = config.num_devices;
                 opts.dim = config.dim;
                 opts.sigma_h = config.sigma_h;
                 return generate_lr_dataset(
                     RngStream(config.data_seed.value_or(config.seed)).derive(kDataTag),
                     opts);
               }()) {}

Protocol::Protocol(const ExperimentConfig& config, Dataset data)
    : config_((config.validate(), config)),
      data_(std::move(data)),
      matrix_(TaskMatrix::cyclic(config.num_devices, config.effective_load())),
      aggregator_(config.effective_aggregator()),
      compressor_(Compressor::parse(config.compressor)),
      attack_(AttackPolicy::parse(config.attack)),
      schedule_(ByzantineSchedule::parse(config.schedule,
                                         config.effective_byzantine_count())),
      root_(config.seed) {
  check_dataset();
}

void Protocol::check_dataset() const {
  if (data_.num_subsets() != config_.num_devices) {
    throw std::invalid_argument("dataset has " + std::to_string(data_.num_subsets()) +
                                " subsets but N = " +
                                std::to_string(config_.num_devices));
  }
  if (data_.dim() != config_.dim) {
    throw std::invalid_argument("dataset dimension " + std::to_string(data_.dim()) +
                                " but Q = " + std::to_string(config_.dim));
  }
}

void Protocol::fill_messages(const ModelVector& x, std::span<const ModelVector> grads,
                             const Assignment& assignment,
                             const std::vector<bool>& is_byzantine,
                             const ModelVector* honest_raw_mean, std::uint64_t t,
                             std::vector<ModelVector>& msgs,
                             std::vector<unsigned char>& clipped) const {
  (void)x;
  const std::size_t n = config_.num_devices;
  const bool compressing = compressor_.kind() != Compressor::Kind::kIdentity;
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      ModelVector raw = encode_from_gradients(i, assignment, grads, matrix_);
      if (is_byzantine[i]) {
        RngStream attack_rng = root_.derive(kAttackTag, t, i);
        Payload p = byzantine_payload(attack_, raw, honest_raw_mean, attack_rng);
        raw = std::move(p.message);
        clipped[i] = p.clipped ? 1 : 0;
      }
      if (compressing) {
        RngStream compress_rng = root_.derive(kCompressTag, t, i);
        msgs[i] = compress(compressor_, raw, compress_rng);
      } else {
        msgs[i] = std::move(raw);
      }
    }
  };
  const std::size_t threads = std::min(config_.device_threads, n);
  if (threads <= 1) {
    work(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

StepResult Protocol::step(const ModelVector& x, std::span<const ModelVector> grads,
                          std::uint64_t t) const {
  const std::size_t n = config_.num_devices;
  if (grads.size() != n) throw std::invalid_argument("step: gradient count != N");
  StepResult out;

  if (config_.method == Method::kOracle) {
    out.aggregate = average_all(grads);
    out.honest_mean = out.aggregate;
    out.uplink_scalars = config_.dim;
    return out;
  }

  RngStream assign_rng = root_.derive(kAssignTag, t);
  const Assignment assignment = sample_assignment(assign_rng, n);
  out.byzantine = select_byzantine_set(schedule_, n, config_.num_honest, t, root_);
  std::vector<bool> is_byzantine(n, false);
  for (std::size_t i : out.byzantine) is_byzantine[i] = true;

  std::optional<ModelVector> raw_mean;
  if (attack_.kind() == AttackPolicy::Kind::kOpposite) {
    RunningMean acc;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_byzantine[i]) acc.add(encode_from_gradients(i, assignment, grads, matrix_));
    }
    raw_mean = acc.value();
  }

  std::vector<ModelVector> msgs(n);
  std::vector<unsigned char> clipped(n, 0);
  fill_messages(x, grads, assignment, is_byzantine, raw_mean ? &*raw_mean : nullptr, t,
                msgs, clipped);
  for (unsigned char c : clipped) out.clipped_payloads += c;

  RunningMean honest;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_byzantine[i]) honest.add(msgs[i]);
  }
  out.honest_mean = honest.value();
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_byzantine[i]) out.honest_variance += squared_distance(msgs[i], out.honest_mean);
  }
  out.honest_variance /= static_cast<double>(honest.count());
  out.aggregate = aggregate(aggregator_, msgs);
  out.deviation_sq = squared_distance(out.aggregate, out.honest_mean);
  out.uplink_scalars = uplink_scalars(compressor_, config_.dim);
  return out;
}

namespace {

RunRecord run_protocol(const Protocol& protocol) {
  const ExperimentConfig& cfg = protocol.config();
  const Dataset& data = protocol.dataset();
  RunRecord record;
  record.config = cfg;
  ModelVector x(cfg.dim, cfg.x0);

  for (std::size_t t = 0;; ++t) {
    const std::vector<ModelVector> grads = local_gradients(data, x);
    IterationRecord row;
    row.t = t;
    row.loss = full_loss(data, x);
    row.grad_norm_sq = squared_norm(sum_all(grads));
    const bool last = t == cfg.iterations;
    const bool blown = !std::isfinite(row.loss) || row.loss > cfg.divergence_guard;
    if (last || blown) {
      record.rows.push_back(row);
      record.diverged = blown;
      break;
    }
    StepResult s = protocol.step(x, grads, t);
    row.agg_deviation_sq = s.deviation_sq;
    row.uplink_scalars = s.uplink_scalars;
    record.clipped_payloads += s.clipped_payloads;
    if (t % cfg.log_stride == 0) record.rows.push_back(row);
    axpy(-cfg.gamma, s.aggregate, x);
  }
  record.final_model = std::move(x);
  return record;
}

void require_method(const ExperimentConfig& config, bool ok, const char* runner) {
  if (!ok) {
    throw std::invalid_argument(std::string(runner) + " cannot run method " +
                                std::string(method_name(config.method)));
  }
}

}  // namespace

RunRecord run_lad(const ExperimentConfig& config) {
  require_method(config, config.method == Method::kLad, "run_lad");
  return run_protocol(Protocol(config));
}

RunRecord run_com_lad(const ExperimentConfig& config) {
  require_method(config, config.method == Method::kComLad, "run_com_lad");
  return run_protocol(Protocol(config));
}

RunRecord run_baseline(const ExperimentConfig& config) {
  require_method(config, is_baseline(config.method) || config.method == Method::kOracle,
                 "run_baseline");
  return run_protocol(Protocol(config));
}

RunRecord run(const ExperimentConfig& config) {
  switch (config.method) {
    case Method::kLad:
      return run_lad(config);
    case Method::kComLad:
      return run_com_lad(config);
    default:
      return run_baseline(config);
  }
}

RunRecord run(const ExperimentConfig& config, const Dataset& data) {
  return run_protocol(Protocol(config, data));
}

std::vector<RunRecord> sweep(const std::vector<ExperimentConfig>& configs,
                             std::size_t jobs) {
  std::vector<RunRecord> out(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        out[i] = run(configs[i]);
      } catch (const std::exception& e) {
        out[i] = RunRecord{};
        out[i].config = configs[i];
        out[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, configs.size()));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return out;
}

void write_run_csv(std::ostream& out, const RunRecord& record) {
  out << "t,loss,grad_norm_sq,agg_deviation_sq,uplink_scalars\n";
  char buf[160];
  for (const IterationRecord& r : record.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%zu\n", r.t, r.loss,
                  r.grad_norm_sq, r.agg_deviation_sq, r.uplink_scalars);
    out << buf;
  }
}

std::vector<IterationRecord> read_run_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "t,loss,grad_norm_sq,agg_deviation_sq,uplink_scalars") {
    throw std::invalid_argument("run CSV: unexpected header");
  }
  std::vector<IterationRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    IterationRecord r;
    std::istringstream fields(line);
    char c1 = 0, c2 = 0, c3 = 0, c4 = 0;
    if (!(fields >> r.t >> c1 >> r.loss >> c2 >> r.grad_norm_sq >> c3 >>
          r.agg_deviation_sq >> c4 >> r.uplink_scalars) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw std::invalid_argument("run CSV line " + std::to_string(line_no) +
                                  ": malformed row");
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace bygrad
