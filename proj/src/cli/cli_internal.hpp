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

// Pieces shared between the CLI translation units.

#ifndef BYGRAD_SRC_CLI_CLI_INTERNAL_HPP_
#define BYGRAD_SRC_CLI_CLI_INTERNAL_HPP_

#include <string>
#include <vector>

namespace bygrad::cli::detail {

struct PresetEntry {
  const char* name;
  const char* text;
};

// Terminated by a {nullptr, nullptr} entry.
extern const PresetEntry kPresets[];

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

// A self-contained SVG line chart. Non-positive values are dropped from a
// log-scale chart.
std::string render_svg(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace bygrad::cli::detail

#endif  // BYGRAD_SRC_CLI_CLI_INTERNAL_HPP_
