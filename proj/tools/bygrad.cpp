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

#include <iostream>

#include "CLI11.hpp"
#include "bygrad/cli.hpp"

namespace {

void add_common(CLI::App* app, bygrad::cli::CommonOptions& o, bool with_jobs) {
  app->add_option("--config", o.config_path, "JSON config file");
  app->add_option("--preset", o.preset, "built-in preset (fig2, fig3, fig4, fig5a, fig5b, fig7)");
  app->add_option("--out", o.out_dir, "output root (default $BYGRAD_OUT or bygrad-out)");
  app->add_option("--seed", o.seed, "override the config's seeds with a single seed");
  if (with_jobs) app->add_option("--jobs", o.jobs, "parallel runs")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bygrad: Byzantine-robust coded distributed training simulator"};
  app.require_subcommand(1);

  bygrad::cli::CommonOptions train_opts, theory_opts;
  bygrad::cli::VerifyOptions verify_opts;
  bygrad::cli::PlotOptions plot_opts;

  auto* train = app.add_subcommand("train", "run experiment sweeps and write CSVs");
  add_common(train, train_opts, true);
  auto* theory = app.add_subcommand("theory", "evaluate the convergence constants and curves");
  add_common(theory, theory_opts, false);
  auto* verify = app.add_subcommand("verify", "run the identity and property suite");
  add_common(verify, verify_opts.common, false);
  verify->add_option("--mutate", verify_opts.mutate,
                     "negative control: lemma1, encoder or sparsify")
      ->check(CLI::IsMember({"lemma1", "encoder", "sparsify"}));
  auto* plot = app.add_subcommand("plot", "render SVG charts from a manifest");
  plot->add_option("--manifest", plot_opts.manifest_path, "manifest.json or its directory")
      ->required();
  bool log_y = false, linear_y = false;
  plot->add_flag("--log-y", log_y, "log-scale y axis");
  plot->add_flag("--linear-y", linear_y, "linear y axis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return bygrad::cli::cmd_train(train_opts, std::cout, std::cerr);
    if (*theory) return bygrad::cli::cmd_theory(theory_opts, std::cout, std::cerr);
    if (*verify) return bygrad::cli::cmd_verify(verify_opts, std::cout, std::cerr);
    if (log_y && linear_y) {
      std::cerr << "error: --log-y and --linear-y are exclusive\n";
      return 2;
    }
    if (log_y) plot_opts.log_y = true;
    if (linear_y) plot_opts.log_y = false;
    return bygrad::cli::cmd_plot(plot_opts, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
