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

// Command-line front end: configuration files, presets and the train,
// theory, verify and plot commands. Each command writes human-readable
// output to `out`, diagnostics to `err`, and returns a process exit code.

#ifndef BYGRAD_CLI_HPP_
#define BYGRAD_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bygrad/analysis.hpp"
#include "bygrad/sim.hpp"

namespace bygrad::cli {

// A configuration problem; what() starts with `<source>:<line>:` when the
// offending position is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunSpec {
  std::string label;
  ExperimentConfig config;
};

struct TheorySection {
  TheoryParams params;
  bool delta_curve = true;
  bool d_curve = true;
  std::vector<double> deltas;
  std::vector<std::size_t> loads;
  CurveMode mode = CurveMode::kAsymptotic;
};

struct VerifySection {
  std::size_t lemma1_max_n = 12;
  std::size_t encoder_max_n = 7;
  std::size_t sparsify_max_q = 10;
  std::size_t quantize_samples = 100000;
  std::size_t lemma_samples = 2000;
  std::uint64_t seed = 7;
};

struct PlotSection {
  bool log_y = true;
  std::string title;
};

struct ConfigFile {
  std::string name = "run";
  std::string description;
  std::vector<std::uint64_t> seeds{1};
  std::size_t jobs = 1;
  // Expanded over sweep axes and seeds, in file order.
  std::optional<std::vector<RunSpec>> runs;
  std::optional<TheorySection> theory;
  std::optional<VerifySection> verify;
  PlotSection plot;
};

// Parses a JSON config. Unknown keys, wrong types and invalid experiment
// parameters raise ConfigError with a line number.
ConfigFile parse_config(std::string_view text, const std::string& source);
ConfigFile load_config_file(const std::string& path);

// Presets compiled into the binary (the JSON files under presets/).
std::vector<std::string> preset_names();
std::optional<std::string_view> preset_text(std::string_view name);
ConfigFile load_preset(std::string_view name);

struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::string> preset;
  // Output root; falls back to $BYGRAD_OUT, then "bygrad-out". Results go
  // to <root>/<config name>/.
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

int cmd_train(const CommonOptions& options, std::ostream& out, std::ostream& err);
int cmd_theory(const CommonOptions& options, std::ostream& out, std::ostream& err);

struct VerifyOptions {
  CommonOptions common;
  // Negative control: "lemma1" swaps in a wrong Lemma-1 formula,
  // "encoder" a wrong encoder variance, "sparsify" a wrong delta.
  std::string mutate;
};
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);

struct PlotOptions {
  std::string manifest_path;
  // Overrides the manifest's plot.log_y.
  std::optional<bool> log_y;
};
int cmd_plot(const PlotOptions& options, std::ostream& out, std::ostream& err);

// One named identity of the verify suite.
struct CheckResult {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  std::string detail;
};

// Runs the oracle/property suite; `mutate` as in VerifyOptions.
std::vector<CheckResult> run_verify_suite(const VerifySection& section,
                                          const std::string& mutate = "");

// Median over seeds of the final loss, keyed by run label.
struct LabelSummary {
  std::string label;
  std::vector<double> final_losses;  // seed order
  double median = 0.0;
  std::size_t diverged = 0;
};
std::vector<LabelSummary> summarize(const std::vector<RunRecord>& records,
                                    const std::vector<RunSpec>& specs);

}  // namespace bygrad::cli

#endif  // BYGRAD_CLI_HPP_
