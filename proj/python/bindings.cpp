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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bygrad/aggregation.hpp"
#include "bygrad/analysis.hpp"
#include "bygrad/cli.hpp"
#include "bygrad/compression.hpp"
#include "bygrad/sim.hpp"

namespace py = pybind11;

namespace {

bygrad::ModelVector to_vector(const std::vector<double>& v) { return bygrad::ModelVector(v); }

std::vector<bygrad::ModelVector> to_vectors(const std::vector<std::vector<double>>& vs) {
  std::vector<bygrad::ModelVector> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.emplace_back(v);
  return out;
}

}  // namespace

PYBIND11_MODULE(_bygrad, m) {
  m.doc() = "Python bindings for the bygrad simulator";

  py::class_<bygrad::ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_property(
          "method",
          [](const bygrad::ExperimentConfig& c) { return std::string(bygrad::method_name(c.method)); },
          [](bygrad::ExperimentConfig& c, const std::string& s) { c.method = bygrad::parse_method(s); })
      .def_readwrite("N", &bygrad::ExperimentConfig::num_devices)
      .def_readwrite("H", &bygrad::ExperimentConfig::num_honest)
      .def_readwrite("d", &bygrad::ExperimentConfig::load)
      .def_readwrite("Q", &bygrad::ExperimentConfig::dim)
      .def_readwrite("T", &bygrad::ExperimentConfig::iterations)
      .def_readwrite("gamma", &bygrad::ExperimentConfig::gamma)
      .def_readwrite("sigma_H", &bygrad::ExperimentConfig::sigma_h)
      .def_readwrite("aggregator", &bygrad::ExperimentConfig::aggregator)
      .def_readwrite("compressor", &bygrad::ExperimentConfig::compressor)
      .def_readwrite("attack", &bygrad::ExperimentConfig::attack)
      .def_readwrite("schedule", &bygrad::ExperimentConfig::schedule)
      .def_readwrite("byzantine_count", &bygrad::ExperimentConfig::byzantine_count)
      .def_readwrite("seed", &bygrad::ExperimentConfig::seed)
      .def_readwrite("data_seed", &bygrad::ExperimentConfig::data_seed)
      .def_readwrite("x0", &bygrad::ExperimentConfig::x0)
      .def_readwrite("log_stride", &bygrad::ExperimentConfig::log_stride)
      .def("validate", &bygrad::ExperimentConfig::validate)
      .def("canonical", &bygrad::ExperimentConfig::canonical);

  py::class_<bygrad::IterationRecord>(m, "IterationRecord")
      .def_readonly("t", &bygrad::IterationRecord::t)
      .def_readonly("loss", &bygrad::IterationRecord::loss)
      .def_readonly("grad_norm_sq", &bygrad::IterationRecord::grad_norm_sq)
      .def_readonly("agg_deviation_sq", &bygrad::IterationRecord::agg_deviation_sq)
      .def_readonly("uplink_scalars", &bygrad::IterationRecord::uplink_scalars);

  py::class_<bygrad::RunRecord>(m, "RunRecord")
      .def_readonly("rows", &bygrad::RunRecord::rows)
      .def_readonly("diverged", &bygrad::RunRecord::diverged)
      .def_property_readonly("final_model",
                             [](const bygrad::RunRecord& r) { return r.final_model.as_vector(); })
      .def("final_loss", &bygrad::RunRecord::final_loss);

  m.def("run", [](const bygrad::ExperimentConfig& c) {
    py::gil_scoped_release release;
    return bygrad::run(c);
  });
  m.def("sweep", [](const std::vector<bygrad::ExperimentConfig>& cs, std::size_t jobs) {
    py::gil_scoped_release release;
    return bygrad::sweep(cs, jobs);
  }, py::arg("configs"), py::arg("jobs") = 1);

  py::class_<bygrad::TheoryParams>(m, "TheoryParams")
      .def(py::init<>())
      .def_readwrite("N", &bygrad::TheoryParams::N)
      .def_readwrite("H", &bygrad::TheoryParams::H)
      .def_readwrite("d", &bygrad::TheoryParams::d)
      .def_readwrite("kappa", &bygrad::TheoryParams::kappa)
      .def_readwrite("beta", &bygrad::TheoryParams::beta)
      .def_readwrite("delta", &bygrad::TheoryParams::delta)
      .def_readwrite("L", &bygrad::TheoryParams::L)
      .def_readwrite("gamma0", &bygrad::TheoryParams::gamma0)
      .def_readwrite("F0_minus_Fstar", &bygrad::TheoryParams::F0_minus_Fstar);

  m.def("compute_constants", [](const bygrad::TheoryParams& p) {
    const auto c = bygrad::compute_constants(p);
    py::dict d;
    d["kappa1"] = c.kappa1;
    d["kappa2"] = c.kappa2;
    d["kappa3"] = c.kappa3;
    d["kappa4"] = c.kappa4;
    d["xi1"] = c.xi1;
    d["xi2"] = c.xi2;
    d["xi3"] = c.xi3;
    d["xi4"] = c.xi4;
    return d;
  });
  m.def("asymptotic_error_term",
        [](const bygrad::TheoryParams& p) { return bygrad::asymptotic_error_term(p); });
  m.def("d_threshold", &bygrad::d_threshold, py::arg("N"), py::arg("H"), py::arg("kappa"));
  m.def("lemma1_value", &bygrad::lemma1_value, py::arg("N"), py::arg("H"), py::arg("d"));
  m.def("lemma1_enumerate_cyclic", [](std::size_t N, std::size_t H, std::size_t d) {
    return bygrad::lemma1_enumerate(bygrad::TaskMatrix::cyclic(N, d), H);
  });

  m.def("aggregate", [](const std::string& spec, const std::vector<std::vector<double>>& msgs) {
    return bygrad::aggregate(bygrad::Aggregator::parse(spec), to_vectors(msgs)).as_vector();
  });
  m.def("compress", [](const std::string& spec, const std::vector<double>& g, std::uint64_t seed) {
    bygrad::RngStream rng(seed);
    return bygrad::compress(bygrad::Compressor::parse(spec), to_vector(g), rng).as_vector();
  });
  m.def("delta_of", [](const std::string& spec, std::size_t dim) {
    return bygrad::delta_of(bygrad::Compressor::parse(spec), dim);
  });

  m.def("verify", [](std::uint64_t seed) {
    bygrad::cli::VerifySection s;
    s.seed = seed;
    s.quantize_samples = 20000;
    std::vector<std::tuple<std::string, bool, double>> out;
    for (const auto& r : bygrad::cli::run_verify_suite(s)) {
      out.emplace_back(r.name, r.passed, r.max_error);
    }
    return out;
  }, py::arg("seed") = 7);
}
