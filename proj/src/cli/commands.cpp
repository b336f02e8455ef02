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
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bygrad/cli.hpp"
#include "cli_internal.hpp"

namespace bygrad::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

ConfigFile resolve_config(const CommonOptions& o) {
  if (o.config_path && o.preset) {
    throw ConfigError("give either --config or --preset, not both");
  }
  if (!o.config_path && !o.preset) throw ConfigError("one of --config or --preset is required");
  ConfigFile cfg = o.config_path ? load_config_file(*o.config_path) : load_preset(*o.preset);
  if (o.jobs) cfg.jobs = *o.jobs;
  if (cfg.jobs == 0) cfg.jobs = 1;
  if (o.seed && cfg.runs) {
    // Keep one copy of each run (the first seed's) and reseed it.
    const std::uint64_t first = cfg.seeds.empty() ? 1 : cfg.seeds.front();
    std::vector<RunSpec> kept;
    for (RunSpec& spec : *cfg.runs) {
      if (spec.config.seed != first) continue;
      spec.config.seed = *o.seed;
      kept.push_back(std::move(spec));
    }
    cfg.runs = std::move(kept);
    cfg.seeds = {*o.seed};
  }
  if (o.seed && cfg.verify) cfg.verify->seed = *o.seed;
  return cfg;
}

fs::path output_dir(const CommonOptions& o, const ConfigFile& cfg) {
  fs::path root;
  if (o.out_dir) {
    root = *o.out_dir;
  } else if (const char* env = std::getenv("BYGRAD_OUT"); env != nullptr && *env != '\0') {
    root = env;
  } else {
    root = "bygrad-out";
  }
  return root / cfg.name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Json plot_json(const PlotSection& p) { return Json{{"log_y", p.log_y}, {"title", p.title}}; }

// Merges `patch` into an existing manifest so train and theory outputs of the
// same config can share one directory.
void update_manifest(const fs::path& dir, const ConfigFile& cfg, const std::string& key,
                     Json value) {
  const fs::path path = dir / "manifest.json";
  Json m = Json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      m = Json::parse(in);
    } catch (const Json::parse_error&) {
      m = Json::object();
    }
  }
  m["name"] = cfg.name;
  m["description"] = cfg.description;
  m["plot"] = plot_json(cfg.plot);
  m[key] = std::move(value);
  write_text(path, m.dump(2) + "\n");
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string optional_text(const std::optional<double>& v) {
  return v ? fmt(*v) : std::string("unavailable");
}

Json optional_json(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

std::vector<LabelSummary> summarize(const std::vector<RunRecord>& records,
                                    const std::vector<RunSpec>& specs) {
  if (records.size() != specs.size()) {
    throw std::invalid_argument("summarize: records and specs differ in length");
  }
  std::vector<LabelSummary> out;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [it, inserted] = index.emplace(specs[i].label, out.size());
    if (inserted) out.push_back({specs[i].label, {}, 0.0, 0});
    LabelSummary& s = out[it->second];
    const RunRecord& r = records[i];
    if (!r.error.empty() || r.rows.empty()) {
      s.final_losses.push_back(std::nan(""));
      ++s.diverged;
      continue;
    }
    if (r.diverged) ++s.diverged;
    s.final_losses.push_back(r.final_loss());
  }
  for (LabelSummary& s : out) {
    std::vector<double> finite;
    for (double v : s.final_losses) {
      if (std::isfinite(v)) finite.push_back(v);
    }
    // A diverged seed counts as +inf so the median stays honest.
    for (std::size_t k = finite.size(); k < s.final_losses.size(); ++k) {
      finite.push_back(std::numeric_limits<double>::infinity());
    }
    s.median = median_of(finite);
  }
  return out;
}

int cmd_train(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  ConfigFile cfg;
  try {
    cfg = resolve_config(options);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (!cfg.runs || cfg.runs->empty()) {
    out << "nothing to train: config `" << cfg.name << "` has no runs\n";
    return 0;
  }
  const std::vector<RunSpec>& specs = *cfg.runs;
  const fs::path dir = output_dir(options, cfg);
  fs::create_directories(dir / "runs");

  std::vector<ExperimentConfig> configs;
  configs.reserve(specs.size());
  for (const RunSpec& s : specs) configs.push_back(s.config);
  out << "training " << configs.size() << " run(s) of `" << cfg.name << "` with " << cfg.jobs
      << " job(s)\n";
  const std::vector<RunRecord> records = sweep(configs, cfg.jobs);

  Json runs = Json::array();
  int failures = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RunRecord& r = records[i];
    const std::string file = "runs/" + run_file_name(r.config);
    Json entry{{"label", specs[i].label},
               {"method", std::string(method_name(r.config.method))},
               {"seed", r.config.seed},
               {"config", r.config.canonical()},
               {"file", file}};
    if (!r.error.empty()) {
      ++failures;
      err << "run `" << specs[i].label << "` seed " << r.config.seed << " failed: " << r.error
          << "\n";
      entry["file"] = nullptr;
      entry["final_loss"] = nullptr;
      entry["diverged"] = false;
      entry["error"] = r.error;
    } else {
      std::ofstream csv(dir / file);
      if (!csv) {
        err << "error: cannot write " << (dir / file).string() << "\n";
        return 1;
      }
      write_run_csv(csv, r);
      entry["final_loss"] = finite_or_null(r.final_loss());
      entry["diverged"] = r.diverged;
      entry["error"] = nullptr;
      if (r.diverged) {
        err << "warning: run `" << specs[i].label << "` seed " << r.config.seed
            << " diverged at t=" << r.rows.back().t << "\n";
      }
    }
    runs.push_back(std::move(entry));
  }
  update_manifest(dir, cfg, "runs", std::move(runs));

  out << "\n";
  std::size_t width = 5;
  for (const RunSpec& s : specs) width = std::max(width, s.label.size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %6s  %14s  %s\n", static_cast<int>(width), "label",
                "seeds", "median loss", "diverged");
  out << line;
  for (const LabelSummary& s : summarize(records, specs)) {
    std::snprintf(line, sizeof line, "%-*s  %6zu  %14.6g  %zu\n", static_cast<int>(width),
                  s.label.c_str(), s.final_losses.size(), s.median, s.diverged);
    out << line;
  }
  out << "\nresults in " << dir.string() << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_theory(const CommonOptions& options, std::ostream& out, std::ostream& err) {
  ConfigFile cfg;
  try {
    cfg = resolve_config(options);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (!cfg.theory) {
    err << "error: config `" << cfg.name << "` has no `theory` section\n";
    return 2;
  }
  const TheorySection& t = *cfg.theory;
  const TheoryParams& p = t.params;
  const fs::path dir = output_dir(options, cfg);
  fs::create_directories(dir);

  const BoundReport report = error_terms(p);
  const TheoryConstants& c = report.constants;
  const std::size_t threshold = d_threshold(p.N, p.H, p.kappa);

  out << "N=" << p.N << " H=" << p.H << " d=" << p.d << " kappa=" << fmt(p.kappa)
      << " beta=" << fmt(p.beta) << " delta=" << fmt(p.delta) << "\n";
  out << "kappa1..4 = " << fmt(c.kappa1) << ", " << fmt(c.kappa2) << ", " << fmt(c.kappa3)
      << ", " << fmt(c.kappa4) << "\n";
  out << "xi1..4    = " << fmt(c.xi1) << ", " << fmt(c.xi2) << ", " << fmt(c.xi3) << ", "
      << fmt(c.xi4) << "\n";
  out << "load threshold d* = " << threshold << "\n";
  out << "max stable gamma (Com-LAD) = " << optional_text(report.max_stable_gamma) << "\n";
  out << "max stable gamma (LAD)     = " << optional_text(report.max_stable_gamma_lad) << "\n";
  out << "asymptotic error term = " << fmt(report.asymptotic_error_term) << "\n";
  if (!report.feasible) {
    err << "warning: sqrt(kappa*kappa2) >= 1/N, the finite-gamma bound does not apply; "
           "only the asymptotic term is reported\n";
  } else {
    out << "error term (gamma0=" << fmt(p.gamma0) << ") = " << optional_text(report.error_term)
        << "\n";
  }

  Json theory{{"params",
               {{"N", p.N},
                {"H", p.H},
                {"d", p.d},
                {"kappa", p.kappa},
                {"beta", p.beta},
                {"delta", p.delta},
                {"L", p.L},
                {"gamma0", p.gamma0},
                {"F0_minus_Fstar", p.F0_minus_Fstar}}},
              {"constants",
               {{"kappa1", c.kappa1},
                {"kappa2", c.kappa2},
                {"kappa3", c.kappa3},
                {"kappa4", c.kappa4},
                {"xi1", c.xi1},
                {"xi2", c.xi2},
                {"xi3", c.xi3},
                {"xi4", c.xi4}}},
              {"feasible", report.feasible},
              {"lad_feasible", report.lad_feasible},
              {"error_term", optional_json(report.error_term)},
              {"eps_lad", optional_json(report.eps_lad)},
              {"eps_lad_from_com", optional_json(report.eps_lad_from_com)},
              {"transient_coeff", optional_json(report.transient_coeff)},
              {"max_stable_gamma", optional_json(report.max_stable_gamma)},
              {"max_stable_gamma_lad", optional_json(report.max_stable_gamma_lad)},
              {"asymptotic_error_term", finite_or_null(report.asymptotic_error_term)},
              {"d_threshold", threshold},
              {"mode", t.mode == CurveMode::kAsymptotic ? "asymptotic" : "full"}};
  write_text(dir / "theory.json", theory.dump(2) + "\n");

  Json curves = Json::array();
  auto emit = [&](const std::string& param, const std::vector<CurvePoint>& curve) {
    const std::string file = "curve_" + param + ".csv";
    std::ofstream csv(dir / file);
    write_curve_csv(csv, param, curve);
    curves.push_back({{"param", param}, {"file", file}, {"points", curve.size()}});
    out << "wrote " << (dir / file).string() << " (" << curve.size() << " points)\n";
  };
  if (t.delta_curve) emit("delta", error_curve_delta(p, t.deltas, t.mode));
  if (t.d_curve) emit("d", error_curve_d(p, t.loads, t.mode));
  update_manifest(dir, cfg, "curves", std::move(curves));
  return 0;
}

namespace {

std::vector<IterationRecord> read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing run file " + path.string());
  try {
    return read_run_csv(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

detail::Series read_curve(const fs::path& path, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing curve file " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "param,value,error_term") {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  detail::Series s{name, {}, {}};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad row");
    }
    s.x.push_back(std::stod(line.substr(a + 1, b - a - 1)));
    s.y.push_back(std::stod(line.substr(b + 1)));
  }
  return s;
}

}  // namespace

int cmd_plot(const PlotOptions& options, std::ostream& out, std::ostream& err) {
  fs::path manifest_path = options.manifest_path;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) {
    err << "error: cannot open manifest " << manifest_path.string() << "\n";
    return 2;
  }
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::parse_error& e) {
    err << "error: " << manifest_path.string() << ": " << e.what() << "\n";
    return 2;
  }
  const fs::path dir = manifest_path.parent_path();
  bool log_y = true;
  std::string title = m.value("name", std::string("bygrad"));
  if (m.contains("plot")) {
    log_y = m["plot"].value("log_y", true);
    const std::string t = m["plot"].value("title", std::string());
    if (!t.empty()) title = t;
  }
  if (options.log_y) log_y = *options.log_y;

  const bool has_runs = m.contains("runs") && m["runs"].is_array() && !m["runs"].empty();
  const bool has_curves =
      m.contains("curves") && m["curves"].is_array() && !m["curves"].empty();
  if (!has_runs && !has_curves) {
    err << "warning: manifest " << manifest_path.string() << " lists no runs or curves\n";
    return 0;
  }

  try {
    if (has_runs) {
      // Median over seeds of F(x^t) per label, on the rows all seeds share.
      std::vector<std::string> order;
      std::map<std::string, std::vector<std::vector<IterationRecord>>> by_label;
      for (const Json& r : m["runs"]) {
        if (!r.contains("file") || r["file"].is_null()) continue;
        const std::string label = r.value("label", std::string("run"));
        if (!by_label.count(label)) order.push_back(label);
        by_label[label].push_back(read_csv_file(dir / r["file"].get<std::string>()));
      }
      std::vector<detail::Series> series;
      for (const std::string& label : order) {
        const auto& seeds = by_label[label];
        std::size_t rows = seeds.front().size();
        for (const auto& s : seeds) rows = std::min(rows, s.size());
        detail::Series s{label, {}, {}};
        for (std::size_t k = 0; k < rows; ++k) {
          std::vector<double> vals;
          for (const auto& run : seeds) vals.push_back(run[k].loss);
          s.x.push_back(static_cast<double>(seeds.front()[k].t));
          s.y.push_back(median_of(vals));
        }
        series.push_back(std::move(s));
      }
      const fs::path svg = dir / "loss.svg";
      write_text(svg, detail::render_svg(series, {title, "iteration t", "F(x^t)", log_y}));
      out << "wrote " << svg.string() << "\n";
    }
    if (has_curves) {
      for (const Json& c : m["curves"]) {
        const std::string param = c.value("param", std::string("param"));
        const std::string file = c.value("file", std::string());
        detail::Series s = read_curve(dir / file, "error term");
        const fs::path svg = dir / ("curve_" + param + ".svg");
        write_text(svg, detail::render_svg({s}, {title, param, "error term", log_y}));
        out << "wrote " << svg.string() << "\n";
      }
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bygrad::cli
