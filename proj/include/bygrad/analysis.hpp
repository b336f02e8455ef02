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

// Closed-form convergence theory for LAD and Com-LAD: the constants of the
// deviation and honest-average lemmas, the stationary error terms, the
// learning-rate ceilings, the load threshold, and Monte Carlo checks of the
// lemmas at a frozen model.

#ifndef BYGRAD_ANALYSIS_HPP_
#define BYGRAD_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bygrad/coding.hpp"
#include "bygrad/core.hpp"
#include "bygrad/data.hpp"
#include "bygrad/sim.hpp"

namespace bygrad {

struct TheoryParams {
  std::size_t N = 100;
  std::size_t H = 65;
  std::size_t d = 5;
  double kappa = 1.5;
  double beta = 1.0;
  double delta = 0.0;
  double L = 1.0;
  double gamma0 = 0.0;
  double F0_minus_Fstar = 0.0;

  // Throws std::invalid_argument unless N >= 2, N/2 < H <= N, 1 <= d <= N
  // and the reals are in range.
  void validate() const;
};

// kappa1..kappa4 belong to Com-LAD, xi1..xi4 to LAD. At delta = 0 each
// kappa_i equals xi_i.
struct TheoryConstants {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa3 = 0.0;
  double kappa4 = 0.0;
  double xi1 = 0.0;
  double xi2 = 0.0;
  double xi3 = 0.0;
  double xi4 = 0.0;
};

TheoryConstants compute_constants(const TheoryParams& p);

enum class Variant { kLad, kComLad };

struct BoundReport {
  TheoryConstants constants;
  // sqrt(kappa * kappa2) < 1/N (with xi2 for LAD).
  bool feasible = false;
  bool lad_feasible = false;
  // Empty when infeasible or gamma0 is not below the stable ceiling.
  std::optional<double> error_term;       // Com-LAD
  std::optional<double> eps_lad;          // LAD, written with the beta factor
  std::optional<double> eps_lad_from_com; // Com-LAD form evaluated at delta = 0
  std::optional<double> transient_coeff;  // multiplies 1/T, Com-LAD
  std::optional<double> max_stable_gamma;      // Com-LAD
  std::optional<double> max_stable_gamma_lad;  // LAD
  // kappa1 sqrt(kappa) / (2 sqrt(kappa2)): the error term as gamma0 -> 0.
  double asymptotic_error_term = 0.0;
};

BoundReport error_terms(const TheoryParams& p);

// Strict upper bound on gamma0; empty when infeasible.
std::optional<double> max_stable_gamma(const TheoryParams& p, Variant v);

// kappa1 sqrt(kappa) / (2 sqrt(kappa2)), defined for every valid parameter
// set: 0 when kappa or kappa1 vanish, +inf when only kappa2 does.
double asymptotic_error_term(const TheoryParams& p, Variant v = Variant::kComLad);

// Smallest integer d with d >= N^2 / (kappa H (N - H) + N), at least 1.
// For H = N this is N.
std::size_t d_threshold(std::size_t N, std::size_t H, double kappa);

// (N-H)(N-d) / (d H (N-1) N). Throws std::invalid_argument for N < 2 or
// parameters outside 1 <= d, H <= N.
double lemma1_value(std::size_t N, std::size_t H, std::size_t d);

// E || (1/(dH)) h S - (1/N) 1 ||^2 over a uniformly random honest indicator
// h with H ones, by enumerating all C(N, H) choices. Throws BudgetExceeded
// when C(N, H) exceeds `max_subsets`.
double lemma1_enumerate(const TaskMatrix& S, std::size_t H,
                        std::uint64_t max_subsets = 1000000);

// Same expectation in closed form through the column sums of S.
double lemma1_closed_form_for(const TaskMatrix& S, std::size_t H);

struct Lemma1Estimate {
  double value = 0.0;
  double standard_error = 0.0;  // 0 when exact
  bool exact = false;
  std::uint64_t samples = 0;
};

// Exact enumeration when C(N, H) <= max_subsets, Monte Carlo otherwise.
Lemma1Estimate lemma1_estimate(const TaskMatrix& S, std::size_t H, RngStream& rng,
                               std::uint64_t max_subsets = 1000000,
                               std::uint64_t mc_samples = 200000);

// Curves of the error term against one parameter.
enum class CurveMode {
  // kappa1 sqrt(kappa) / (2 sqrt(kappa2)); defined everywhere.
  kAsymptotic,
  // The full Com-LAD error term; points where it is unavailable are skipped.
  kFull,
};

struct CurvePoint {
  double value = 0.0;
  double error_term = 0.0;
};

std::vector<CurvePoint> error_curve_delta(const TheoryParams& p,
                                          const std::vector<double>& deltas,
                                          CurveMode mode = CurveMode::kAsymptotic);
std::vector<CurvePoint> error_curve_d(const TheoryParams& p,
                                      const std::vector<std::size_t>& loads,
                                      CurveMode mode = CurveMode::kAsymptotic);
// {lo, lo+step, ..., hi}, robust to accumulated rounding.
std::vector<double> linear_grid(double lo, double hi, double step);

// Header `param,value,error_term`.
void write_curve_csv(std::ostream& out, const std::string& param,
                     const std::vector<CurvePoint>& curve);

struct LemmaCheckOptions {
  std::size_t samples = 2000;
  // Slack in standard errors for the Monte Carlo comparisons.
  double sigmas = 3.0;
  // The exact honest-average step runs for N up to this size.
  std::size_t exact_max_n = 8;
  std::size_t corollary_matrices = 20;
};

struct LemmaCheckReport {
  double beta_hat_sq = 0.0;
  double grad_norm_sq = 0.0;
  double kappa = 0.0;
  double delta = 0.0;
  TheoryConstants constants;

  double deviation_mean = 0.0;
  double deviation_stderr = 0.0;
  double deviation_bound = 0.0;
  bool deviation_ok = false;
  // Largest observed ||agg - gbar||^2 / honest variance; above kappa means
  // the aggregator broke its declared coefficient on this problem.
  double max_observed_ratio = 0.0;

  double honest_sq_mean = 0.0;
  double honest_sq_stderr = 0.0;
  double honest_sq_bound = 0.0;
  bool honest_sq_ok = false;

  // Exact E||(1/H) sum_honest g_i - mu||^2 over honest row sets and data
  // permutations, its sharp closed form and the looser lemma bound.
  bool exact_step_ran = false;
  double exact_step_value = 0.0;
  double exact_step_sharp = 0.0;
  double exact_step_bound = 0.0;
  bool exact_step_ok = true;

  // Cyclic matrix against random row-regular matrices.
  double corollary_cyclic = 0.0;
  double corollary_min_random = 0.0;
  std::size_t corollary_trials = 0;
  bool corollary_ok = true;

  bool partial = false;
  std::vector<std::string> notes;

  bool ok() const {
    return deviation_ok && honest_sq_ok && exact_step_ok && corollary_ok;
  }
};

// Samples the protocol of `config` at the frozen model `x` (one draw per
// iteration label) and compares the sampled left sides of the deviation and
// honest-average lemmas with their right sides, using beta^2 = the measured
// heterogeneity at x and delta = delta_of(compressor). `kappa` is the
// coefficient assumed for the aggregator.
LemmaCheckReport verify_lemma_bounds(const ExperimentConfig& config, const Dataset& data,
                                     const ModelVector& x, double kappa, RngStream& rng,
                                     const LemmaCheckOptions& options = {});

}  // namespace bygrad

#endif  // BYGRAD_ANALYSIS_HPP_
