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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "bygrad/aggregation.hpp"
#include "bygrad/analysis.hpp"
#include "bygrad/attacks.hpp"
#include "bygrad/cli.hpp"
#include "bygrad/coding.hpp"
#include "bygrad/compression.hpp"
#include "bygrad/data.hpp"
#include "bygrad/sim.hpp"

namespace bygrad::cli {
namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Accumulates the worst error of one named identity.
class Check {
 public:
  Check(std::string name, double tol) : name_(std::move(name)), tol_(tol) {}

  void error(double e, const std::string& where) {
    if (!(e <= max_error_)) {
      max_error_ = e;
      worst_ = where;
    }
    if (!(e <= tol_)) failed_ = true;
  }
  void require(bool ok, const std::string& where) {
    if (!ok && !failed_) worst_ = where;
    failed_ = failed_ || !ok;
  }
  void note(std::string s) { note_ = std::move(s); }

  CheckResult result() const {
    std::string detail = note_;
    if (failed_ || !worst_.empty()) {
      if (!detail.empty()) detail += "; ";
      detail += (failed_ ? "worst case " : "max error at ") + worst_;
    }
    return {name_, !failed_, std::isnan(max_error_) ? 0.0 : max_error_, detail};
  }

 private:
  std::string name_;
  double tol_;
  double max_error_ = 0.0;
  bool failed_ = false;
  std::string worst_;
  std::string note_;
};

std::vector<ModelVector> random_vectors(RngStream& rng, std::size_t n, std::size_t dim) {
  std::vector<ModelVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    ModelVector v(dim);
    for (std::size_t q = 0; q < dim; ++q) v[q] = rng.normal(0.0, 2.0);
    out.push_back(std::move(v));
  }
  return out;
}

CheckResult check_lemma1(const VerifySection& s, bool mutate) {
  Check c("lemma1.exact_enumeration", 1e-10);
  std::size_t cases = 0;
  for (std::size_t N = 2; N <= s.lemma1_max_n; ++N) {
    for (std::size_t H = N / 2 + 1; H <= N; ++H) {
      for (std::size_t d = 1; d <= N; ++d) {
        const double enumerated = lemma1_enumerate(TaskMatrix::cyclic(N, d), H);
        double formula = lemma1_value(N, H, d);
        if (mutate) {
          // Negative control: the (N-1) factor dropped.
          formula = static_cast<double>((N - H) * (N - d)) /
                    static_cast<double>(d * H * N * N);
        }
        c.error(std::abs(enumerated - formula), "N=" + std::to_string(N) + " H=" +
                                                    std::to_string(H) + " d=" +
                                                    std::to_string(d));
        ++cases;
      }
    }
  }
  c.note(std::to_string(cases) + " (N,H,d) cases");
  return c.result();
}

CheckResult check_infimum(RngStream rng) {
  Check c("lemma1.infimum_over_row_regular", 1e-10);
  const std::size_t N = 6, d = 2, H = 4;
  const double cyclic = lemma1_enumerate(TaskMatrix::cyclic(N, d), H);
  std::size_t nonuniform = 0, uniform = 0, attempts = 0;
  while (nonuniform < 100 && attempts < 100000) {
    ++attempts;
    const TaskMatrix S = TaskMatrix::random_row_regular(rng, N, d);
    const double v = lemma1_enumerate(S, H);
    const std::string where = "matrix #" + std::to_string(attempts);
    if (S.has_uniform_columns()) {
      ++uniform;
      c.error(std::abs(v - cyclic), where + " (uniform columns)");
    } else {
      ++nonuniform;
      // Strictly above the infimum.
      c.require(v > cyclic + 1e-10, where + " value " + fmt(v) + " not above " + fmt(cyclic));
    }
  }
  c.require(nonuniform == 100, "only " + std::to_string(nonuniform) + " non-uniform matrices");
  c.note(std::to_string(nonuniform) + " non-uniform, " + std::to_string(uniform) +
         " uniform matrices");
  return c.result();
}

std::vector<CheckResult> check_encoder(const VerifySection& s, bool mutate) {
  Check mean("coding.encoder_unbiased", 1e-12);
  Check var("coding.encoder_variance", 1e-12);
  RngStream rng = RngStream(s.seed).derive(0xE11C);
  for (std::size_t N = 2; N <= s.encoder_max_n; ++N) {
    DatasetOptions opts;
    opts.num_subsets = N;
    opts.dim = 3;
    opts.sigma_h = 0.3;
    const Dataset data = generate_lr_dataset(rng.derive(N), opts);
    for (std::size_t point = 0; point < 5; ++point) {
      const ModelVector x = random_vectors(rng, 1, opts.dim).front();
      const std::vector<ModelVector> grads = local_gradients(data, x);
      const ModelVector mu = average_all(grads);
      double spread = 0.0;
      for (const ModelVector& g : grads) spread += squared_distance(g, mu);
      for (std::size_t d = 1; d <= N; ++d) {
        const std::string where =
            "N=" + std::to_string(N) + " d=" + std::to_string(d) + " point " +
            std::to_string(point);
        const EncoderMoments m = encoder_moments_exact(grads, TaskMatrix::cyclic(N, d));
        double e = 0.0;
        for (std::size_t q = 0; q < mu.dim(); ++q) e = std::max(e, rel_err(m.mean[q], mu[q]));
        mean.error(e, where);
        const auto Nd = static_cast<double>(N), dd = static_cast<double>(d);
        double expected = (Nd - dd) / (Nd * dd * (Nd - 1.0)) * spread;
        if (mutate) expected = spread / (Nd * dd);
        var.error(rel_err(m.variance, expected), where);
        var.error(rel_err(encoder_variance_closed_form(grads, d), expected), where + " (closed form)");
      }
    }
  }
  return {mean.result(), var.result()};
}

std::vector<CheckResult> check_sparsify(const VerifySection& s, bool mutate) {
  Check unbiased("compression.sparsify_unbiased", 1e-12);
  Check error("compression.sparsify_error_tight", 1e-12);
  Check shape("compression.sparsify_support", 0.0);
  RngStream rng = RngStream(s.seed).derive(0x5BA5);
  for (std::size_t Q = 1; Q <= s.sparsify_max_q; ++Q) {
    const ModelVector g = random_vectors(rng, 1, Q).front();
    for (std::size_t k = 1; k <= Q; ++k) {
      const Compressor c = Compressor::random_sparsification(k);
      const std::string where = "Q=" + std::to_string(Q) + " k=" + std::to_string(k);
      const double scale = static_cast<double>(Q) / static_cast<double>(k);
      // The compressor's output must be scale*g on exactly k coordinates.
      const ModelVector sample = compress(c, g, rng);
      std::size_t support = 0;
      for (std::size_t q = 0; q < Q; ++q) {
        if (sample[q] != 0.0) {
          ++support;
          shape.require(sample[q] == g[q] * scale, where + " coordinate " + std::to_string(q));
        }
      }
      shape.require(support == k, where + " support " + std::to_string(support));

      // Exact expectation over all C(Q,k) equally likely supports.
      ModelVector mean(Q);
      long double err = 0.0L;
      std::uint64_t count = 0;
      for_each_combination(Q, k, [&](const std::vector<std::size_t>& subset) {
        ModelVector out(Q);
        for (std::size_t q : subset) out[q] = g[q] * scale;
        for (std::size_t q = 0; q < Q; ++q) mean[q] += out[q];
        err += squared_distance(out, g);
        ++count;
      });
      double e = 0.0;
      for (std::size_t q = 0; q < Q; ++q) {
        e = std::max(e, rel_err(mean[q] / static_cast<double>(count), g[q]));
      }
      unbiased.error(e, where);
      double delta = delta_of(c, Q);
      if (mutate) delta = scale;
      const double expected_err = static_cast<double>(err / count);
      error.error(rel_err(expected_err, delta * squared_norm(g)), where);
      error.error(rel_err(expected_squared_error(c, g), expected_err), where + " (analytic)");
    }
  }
  return {unbiased.result(), error.result(), shape.result()};
}

std::vector<CheckResult> check_quantize(const VerifySection& s) {
  Check unbiased("compression.quantize_unbiased_4sigma", 0.0);
  Check levels("compression.quantize_two_levels", 0.0);
  Check bound("compression.quantize_delta_bound", 0.0);
  RngStream rng = RngStream(s.seed).derive(0x9A47);
  const std::size_t Q = 10;
  const ModelVector g = random_vectors(rng, 1, Q).front();
  const auto [lo, hi] = std::minmax_element(g.values().begin(), g.values().end());
  const double a = *lo, b = *hi;
  const Compressor c = Compressor::stochastic_quantization();
  std::vector<double> sum(Q, 0.0), sum_sq(Q, 0.0);
  double err = 0.0;
  for (std::size_t m = 0; m < s.quantize_samples; ++m) {
    const ModelVector out = compress(c, g, rng);
    for (std::size_t q = 0; q < Q; ++q) {
      if (out[q] != a && out[q] != b) {
        levels.require(false, "sample " + std::to_string(m) + " coordinate " + std::to_string(q));
      }
      sum[q] += out[q];
      sum_sq[q] += out[q] * out[q];
    }
    err += squared_distance(out, g);
  }
  const auto M = static_cast<double>(s.quantize_samples);
  double worst_z = 0.0;
  for (std::size_t q = 0; q < Q; ++q) {
    const double mean = sum[q] / M;
    const double var = std::max(0.0, sum_sq[q] / M - mean * mean);
    const double se = std::sqrt(var / M);
    // Extreme coordinates are deterministic; there only rounding can differ.
    const double z = se > 0 ? std::abs(mean - g[q]) / se : (rel_err(mean, g[q]) <= 1e-9 ? 0.0 : 1e300);
    worst_z = std::max(worst_z, z);
    unbiased.require(z <= 4.0, "coordinate " + std::to_string(q) + " z=" + fmt(z));
  }
  unbiased.note("M=" + std::to_string(s.quantize_samples) + ", worst |z|=" + fmt(worst_z));
  const double mean_err = err / M;
  bound.require(mean_err <= delta_of(c, Q) * squared_norm(g) * (1 + 1e-9),
                "E|C(g)-g|^2=" + fmt(mean_err) + " > delta|g|^2");
  return {unbiased.result(), levels.result(), bound.result()};
}

// Long-double re-derivation of the constants used as an independent oracle.
TheoryConstants reference_constants(const TheoryParams& p) {
  using LD = long double;
  const LD N = p.N, H = p.H, d = p.d, b2 = static_cast<LD>(p.beta) * p.beta, dl = p.delta;
  const LD B = 4 * (N - H) * (N - d) / (d * H * (N - 1) * N);
  const LD comp = (1 / H + 1) * 4 * dl / d;
  TheoryConstants c;
  c.kappa1 = static_cast<double>(N * b2 * comp + 4 * b2 * (N - d) * N / (d * H * (N - 1)));
  c.kappa2 = static_cast<double>((comp + B) / N);
  c.kappa3 = static_cast<double>((4 * dl / (H * d) + B) * N * b2);
  c.kappa4 = static_cast<double>(2 / (N * N) + 4 * dl / (H * d * N) +
                                 4 * (N - H) * (N - d) / (d * H * (N - 1) * N * N));
  c.xi1 = static_cast<double>(4 * b2 * (N - d) * N / (d * H * (N - 1)));
  c.xi2 = static_cast<double>(B / N);
  c.xi3 = static_cast<double>(8 * (N - H) * (N - d) * b2 / (d * H * (N - 1)));
  c.xi4 = static_cast<double>(2 / (N * N) + 8 * (N - H) * (N - d) / (d * H * (N - 1) * N * N));
  return c;
}

std::vector<CheckResult> check_constants(const VerifySection& s) {
  Check oracle("analysis.constants_reference", 1e-12);
  Check collapse12("analysis.delta0_collapse_kappa1_kappa2", 1e-12);
  Check collapse34("analysis.delta0_collapse_kappa3_kappa4", 1e-12);
  RngStream rng = RngStream(s.seed).derive(0xC057);
  for (int i = 0; i < 20; ++i) {
    TheoryParams p;
    p.N = 3 + rng.uniform_index(198);
    p.H = p.N / 2 + 1 + rng.uniform_index(p.N - p.N / 2);
    p.d = 1 + rng.uniform_index(p.N);
    p.beta = 0.1 + 3.0 * rng.uniform();
    p.delta = 3.0 * rng.uniform();
    const std::string where = "N=" + std::to_string(p.N) + " H=" + std::to_string(p.H) +
                              " d=" + std::to_string(p.d);
    const TheoryConstants got = compute_constants(p);
    const TheoryConstants ref = reference_constants(p);
    for (auto [a, b] : {std::pair{got.kappa1, ref.kappa1}, {got.kappa2, ref.kappa2},
                        {got.kappa3, ref.kappa3}, {got.kappa4, ref.kappa4},
                        {got.xi1, ref.xi1}, {got.xi2, ref.xi2}, {got.xi3, ref.xi3},
                        {got.xi4, ref.xi4}}) {
      oracle.error(rel_err(a, b), where);
    }
    p.delta = 0.0;
    const TheoryConstants z = compute_constants(p);
    collapse12.error(std::max(rel_err(z.kappa1, z.xi1), rel_err(z.kappa2, z.xi2)), where);
    collapse34.error(std::max(rel_err(z.kappa3, z.xi3), rel_err(z.kappa4, z.xi4)), where);
  }
  collapse34.note("xi3/xi4 as printed carry coefficient 8, kappa3/kappa4 at delta=0 give 4");
  return {oracle.result(), collapse12.result(), collapse34.result()};
}

std::vector<CheckResult> check_curves() {
  Check delta_curve("analysis.curve_delta_increasing", 0.0);
  Check d_curve("analysis.curve_d_decreasing", 0.0);
  Check kappa_mono("analysis.error_nondecreasing_in_kappa", 0.0);
  Check threshold("analysis.d_threshold_paper", 0.0);
  TheoryParams p;  // N=100, H=65, kappa=1.5, beta=1
  p.d = 5;
  const auto dc = error_curve_delta(p, linear_grid(0.0, 3.0, 0.05));
  for (std::size_t i = 1; i < dc.size(); ++i) {
    delta_curve.require(dc[i].error_term > dc[i - 1].error_term,
                        "delta=" + fmt(dc[i].value));
  }
  p.delta = 0.5;
  std::vector<std::size_t> loads;
  for (std::size_t d = 1; d <= p.N; ++d) loads.push_back(d);
  const auto lc = error_curve_d(p, loads);
  for (std::size_t i = 1; i < lc.size(); ++i) {
    d_curve.require(lc[i].error_term <= lc[i - 1].error_term, "d=" + fmt(lc[i].value));
  }
  for (std::size_t i = 0; i + 1 < lc.size(); ++i) {
    d_curve.require(lc[i].error_term > lc[i + 1].error_term || lc[i + 1].error_term == 0.0,
                    "d=" + fmt(lc[i + 1].value) + " not strictly below");
  }
  double prev = -1.0;
  for (double kappa = 0.0; kappa <= 10.0; kappa += 0.25) {
    TheoryParams q = p;
    q.kappa = kappa;
    const double e = asymptotic_error_term(q);
    kappa_mono.require(e >= prev, "kappa=" + fmt(kappa));
    prev = e;
  }
  const std::size_t t = d_threshold(100, 65, 1.5);
  threshold.require(t == 3, "d_threshold(100,65,1.5)=" + std::to_string(t));
  return {delta_curve.result(), d_curve.result(), kappa_mono.result(), threshold.result()};
}

std::vector<CheckResult> check_reductions() {
  Check com("sim.identity_compressor_reduces_to_lad", 0.0);
  Check oracle("sim.full_load_mean_reduces_to_oracle", 0.0);
  Check serial("sim.parallel_equals_serial", 0.0);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ExperimentConfig lad;
    lad.method = Method::kLad;
    lad.num_devices = 20;
    lad.num_honest = 15;
    lad.load = 4;
    lad.dim = 6;
    lad.iterations = 40;
    lad.gamma = 1e-4;
    lad.sigma_h = 0.3;
    lad.seed = seed;
    ExperimentConfig comlad = lad;
    comlad.method = Method::kComLad;
    const RunRecord a = run(lad), b = run(comlad);
    com.require(a.rows.size() == b.rows.size() && a.final_model == b.final_model,
                "seed " + std::to_string(seed));
    for (std::size_t i = 0; i < std::min(a.rows.size(), b.rows.size()); ++i) {
      com.require(a.rows[i].loss == b.rows[i].loss, "seed " + std::to_string(seed) + " t=" +
                                                        std::to_string(i));
    }

    ExperimentConfig full = lad;
    full.load = full.num_devices;
    full.byzantine_count = 0;
    full.aggregator = "mean";
    full.attack = "none";
    ExperimentConfig orc = full;
    orc.method = Method::kOracle;
    orc.aggregator.clear();
    const RunRecord c = run(full), o = run(orc);
    oracle.require(c.final_model == o.final_model, "seed " + std::to_string(seed));

    ExperimentConfig par = lad;
    par.device_threads = 4;
    serial.require(run(par).final_model == a.final_model, "seed " + std::to_string(seed));
  }
  return {com.result(), oracle.result(), serial.result()};
}

std::vector<CheckResult> check_aggregators(const VerifySection& s) {
  Check mean_unbounded("aggregation.mean_unbounded", 0.0);
  Check cwtm_stable("aggregation.cwtm_kappa_stable", 0.0);
  Check box("aggregation.bounding_box", 0.0);
  Check nnm_idem("aggregation.nnm_consensus_idempotent", 0.0);
  RngStream rng = RngStream(s.seed).derive(0xA66);

  KappaOptions esc;
  esc.policy = AdversaryPolicy::kNormEscalating;
  esc.num_trials = 2000;
  RngStream r1 = rng.derive(1);
  const KappaEstimate m = estimate_kappa(Aggregator::mean(), esc, r1);
  mean_unbounded.require(m.unbounded, "kappa_hat=" + fmt(m.kappa_hat));

  KappaOptions mixed;
  mixed.num_trials = 10000;
  RngStream r2 = rng.derive(2), r3 = rng.derive(3);
  const KappaEstimate k1 = estimate_kappa(Aggregator::cwtm(0.1), mixed, r2);
  const KappaEstimate k2 = estimate_kappa(Aggregator::cwtm(0.1), mixed, r3);
  const double ratio = k1.kappa_hat / k2.kappa_hat;
  cwtm_stable.require(!k1.unbounded && !k2.unbounded && ratio >= 1 / 1.2 && ratio <= 1.2,
                      fmt(k1.kappa_hat) + " vs " + fmt(k2.kappa_hat));
  cwtm_stable.note("kappa_hat " + fmt(k1.kappa_hat) + " and " + fmt(k2.kappa_hat));

  RngStream r4 = rng.derive(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ModelVector> msgs = random_vectors(r4, 20, 5);
    for (std::size_t i = 0; i < 4; ++i) msgs[i] = scale(msgs[i], 1e3 * (trial + 1));
    for (const Aggregator& agg : {Aggregator::cwtm(0.1), Aggregator::tgn(0.2)}) {
      const ModelVector out = aggregate(agg, msgs);
      for (std::size_t q = 0; q < 5; ++q) {
        double lo = msgs[0][q], hi = lo;
        for (const ModelVector& v : msgs) lo = std::min(lo, v[q]), hi = std::max(hi, v[q]);
        box.require(out[q] >= lo && out[q] <= hi, agg.spec() + " trial " + std::to_string(trial));
      }
    }
    const std::vector<ModelVector> same(10, msgs[5]);
    for (const ModelVector& v : nearest_neighbor_mixing(same, 3)) {
      nnm_idem.require(v == msgs[5], "trial " + std::to_string(trial));
    }
  }
  return {mean_unbounded.result(), cwtm_stable.result(), box.result(), nnm_idem.result()};
}

CheckResult check_lemma_bounds(const VerifySection& s) {
  Check c("analysis.lemma_bounds_small_n", 0.0);
  ExperimentConfig cfg;
  cfg.method = Method::kLad;
  cfg.num_devices = 6;
  cfg.num_honest = 4;
  cfg.load = 2;
  cfg.dim = 3;
  cfg.sigma_h = 0.3;
  cfg.aggregator = "cwtm:0.2";
  cfg.seed = s.seed;
  DatasetOptions opts;
  opts.num_subsets = 6;
  opts.dim = 3;
  opts.sigma_h = 0.3;
  RngStream rng = RngStream(s.seed).derive(0x1E77);
  const Dataset data = generate_lr_dataset(rng.derive(1), opts);

  KappaOptions ko;
  ko.num_devices = 6;
  ko.num_honest = 4;
  ko.dim = 3;
  ko.num_trials = 5000;
  RngStream kr = rng.derive(2);
  const KappaEstimate k = estimate_kappa(Aggregator::cwtm(0.2), ko, kr);
  if (k.unbounded) {
    c.require(false, "cwtm:0.2 kappa unbounded at N=6");
    return c.result();
  }
  LemmaCheckOptions lo;
  lo.samples = s.lemma_samples;
  const ModelVector x = random_vectors(rng, 1, 3).front();
  RngStream vr = rng.derive(3);
  const LemmaCheckReport r = verify_lemma_bounds(cfg, data, x, k.kappa_hat, vr, lo);
  c.require(r.deviation_ok, "deviation " + fmt(r.deviation_mean) + " > bound " +
                                fmt(r.deviation_bound));
  c.require(r.honest_sq_ok, "honest mean " + fmt(r.honest_sq_mean) + " > bound " +
                                fmt(r.honest_sq_bound));
  c.require(r.exact_step_ok, "exact " + fmt(r.exact_step_value) + " vs sharp " +
                                 fmt(r.exact_step_sharp));
  c.require(r.corollary_ok, "cyclic " + fmt(r.corollary_cyclic) + " > random " +
                                fmt(r.corollary_min_random));
  c.note("kappa_hat=" + fmt(k.kappa_hat) + ", deviation " + fmt(r.deviation_mean) + " <= " +
         fmt(r.deviation_bound) + ", honest " + fmt(r.honest_sq_mean) + " <= " +
         fmt(r.honest_sq_bound));
  return c.result();
}

CheckResult check_permutations(const VerifySection& s) {
  Check c("core.permutation_exchangeable", 0.0);
  RngStream rng = RngStream(s.seed).derive(0x9E4);
  const std::size_t n = 5, draws = 50000;
  std::vector<std::size_t> counts(n * n, 0);
  for (std::size_t i = 0; i < draws; ++i) {
    const Permutation p = sample_permutation(rng, n);
    for (std::size_t k = 0; k < n; ++k) ++counts[k * n + p[k]];
  }
  // Chi-square with 16 degrees of freedom for a 5x5 table; 0.1% critical
  // value 39.25.
  const double expected = static_cast<double>(draws) / n;
  double chi2 = 0.0;
  for (std::size_t v : counts) chi2 += (v - expected) * (v - expected) / expected;
  c.require(chi2 < 39.25, "chi2=" + fmt(chi2));
  c.note("chi2=" + fmt(chi2) + " (16 dof)");
  return c.result();
}

}  // namespace

std::vector<CheckResult> run_verify_suite(const VerifySection& section,
                                          const std::string& mutate) {
  if (!mutate.empty() && mutate != "lemma1" && mutate != "encoder" && mutate != "sparsify") {
    throw std::invalid_argument("unknown mutation `" + mutate +
                                "` (expected lemma1, encoder or sparsify)");
  }
  std::vector<CheckResult> out;
  auto add = [&out](std::vector<CheckResult> v) {
    for (auto& r : v) out.push_back(std::move(r));
  };
  out.push_back(check_permutations(section));
  out.push_back(check_lemma1(section, mutate == "lemma1"));
  out.push_back(check_infimum(RngStream(section.seed).derive(0x1AF)));
  add(check_encoder(section, mutate == "encoder"));
  add(check_sparsify(section, mutate == "sparsify"));
  add(check_quantize(section));
  add(check_constants(section));
  add(check_curves());
  add(check_aggregators(section));
  add(check_reductions());
  out.push_back(check_lemma_bounds(section));
  return out;
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  VerifySection section;
  std::string name = "verify";
  if (options.common.config_path || options.common.preset) {
    try {
      CommonOptions o = options.common;
      ConfigFile cfg = o.config_path ? load_config_file(*o.config_path) : load_preset(*o.preset);
      if (cfg.verify) section = *cfg.verify;
      name = cfg.name;
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  if (options.common.seed) section.seed = *options.common.seed;

  const auto start = std::chrono::steady_clock::now();
  std::vector<CheckResult> results;
  try {
    results = run_verify_suite(section, options.mutate);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::size_t failed = 0;
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  for (const CheckResult& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-46s max_err=%-10.3g ", r.passed ? "PASS" : "FAIL",
                  r.name.c_str(), r.max_error);
    out << line << r.detail << "\n";
    if (!r.passed) ++failed;
    report.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"max_error", r.max_error},
                      {"detail", r.detail}});
  }
  out << results.size() - failed << "/" << results.size() << " identities hold ("
      << fmt(seconds) << " s)\n";
  if (options.common.out_dir || std::getenv("BYGRAD_OUT") != nullptr) {
    namespace fs = std::filesystem;
    const char* env = std::getenv("BYGRAD_OUT");
    const fs::path dir =
        fs::path(options.common.out_dir ? *options.common.out_dir : std::string(env)) / name;
    fs::create_directories(dir);
    std::ofstream(dir / "verify.json") << report.dump(2) << "\n";
  }
  if (failed > 0) {
    err << failed << " identity check(s) failed\n";
    return 1;
  }
  return 0;
}

}  // namespace bygrad::cli
