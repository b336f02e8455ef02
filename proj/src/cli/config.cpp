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

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bygrad/cli.hpp"
#include "cli_internal.hpp"

namespace bygrad::cli {
namespace {

using Json = nlohmann::ordered_json;

// Line of every object key, in document order.
std::vector<std::size_t> scan_key_lines(std::string_view text) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c != '"') continue;
    const std::size_t start_line = line;
    for (++i; i < text.size() && text[i] != '"'; ++i) {
      if (text[i] == '\\') ++i;
      else if (text[i] == '\n') ++line;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r' ||
                               text[j] == '\n')) {
      ++j;
    }
    if (j < text.size() && text[j] == ':') lines.push_back(start_line);
  }
  return lines;
}

class Reader {
 public:
  Reader(std::string_view text, std::string source) : source_(std::move(source)) {
    try {
      root_ = Json::parse(text);
    } catch (const Json::parse_error& e) {
      // nlohmann reports "at line L, column C".
      throw ConfigError(source_ + ": invalid JSON: " + e.what());
    }
    const auto key_lines = scan_key_lines(text);
    std::size_t next = 0;
    index("", root_, key_lines, next);
  }

  const Json& root() const { return root_; }

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    std::string p = path;
    auto it = lines_.find(p);
    if (it == lines_.end()) {
      // An array element has no key of its own; use its first key.
      for (auto c = lines_.lower_bound(p + "/");
           c != lines_.end() && c->first.rfind(p + "/", 0) == 0; ++c) {
        if (it == lines_.end() || c->second < it->second) it = c;
      }
    }
    while (it == lines_.end() && !p.empty()) {
      p = p.substr(0, p.rfind('/'));
      it = lines_.find(p);
    }
    const std::string where =
        it == lines_.end() ? source_ : source_ + ":" + std::to_string(it->second);
    throw ConfigError(where + ": " + (path.empty() ? "/" : path) + ": " + msg);
  }

  void require_object(const Json& j, const std::string& path) const {
    if (!j.is_object()) fail(path, "expected an object");
  }

  void check_keys(const Json& obj, const std::string& path,
                  std::initializer_list<std::string_view> allowed) const {
    require_object(obj, path);
    for (const auto& [key, value] : obj.items()) {
      bool known = false;
      for (std::string_view a : allowed) known = known || a == key;
      if (!known) fail(path + "/" + key, "unknown key `" + key + "`");
    }
  }

  std::uint64_t as_uint(const Json& j, const std::string& path) const {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(j.get<std::int64_t>());
    }
    fail(path, "expected a non-negative integer");
  }

  double as_number(const Json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }

  std::string as_string(const Json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }

  bool as_bool(const Json& j, const std::string& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }

  const Json& as_array(const Json& j, const std::string& path) const {
    if (!j.is_array()) fail(path, "expected an array");
    return j;
  }

 private:
  void index(const std::string& path, const Json& j, const std::vector<std::size_t>& key_lines,
             std::size_t& next) {
    if (j.is_object()) {
      for (const auto& [key, value] : j.items()) {
        const std::string child = path + "/" + key;
        if (next < key_lines.size()) lines_[child] = key_lines[next];
        ++next;
        index(child, value, key_lines, next);
      }
    } else if (j.is_array()) {
      for (std::size_t i = 0; i < j.size(); ++i) {
        index(path + "/" + std::to_string(i), j[i], key_lines, next);
      }
    }
  }

  std::string source_;
  Json root_;
  std::map<std::string, std::size_t> lines_;
};

void apply_experiment_field(const Reader& r, ExperimentConfig& cfg, const std::string& key,
                            const Json& v, const std::string& path) {
  try {
    if (key == "method") cfg.method = parse_method(r.as_string(v, path));
    else if (key == "N") cfg.num_devices = r.as_uint(v, path);
    else if (key == "H") cfg.num_honest = r.as_uint(v, path);
    else if (key == "d") cfg.load = r.as_uint(v, path);
    else if (key == "Q") cfg.dim = r.as_uint(v, path);
    else if (key == "T") cfg.iterations = r.as_uint(v, path);
    else if (key == "gamma") cfg.gamma = r.as_number(v, path);
    else if (key == "sigma_H") cfg.sigma_h = r.as_number(v, path);
    else if (key == "aggregator") cfg.aggregator = r.as_string(v, path);
    else if (key == "compressor") cfg.compressor = r.as_string(v, path);
    else if (key == "attack") cfg.attack = r.as_string(v, path);
    else if (key == "schedule") cfg.schedule = r.as_string(v, path);
    else if (key == "byzantine_count") cfg.byzantine_count = r.as_uint(v, path);
    else if (key == "data_seed") cfg.data_seed = r.as_uint(v, path);
    else if (key == "x0") cfg.x0 = r.as_number(v, path);
    else if (key == "log_stride") cfg.log_stride = r.as_uint(v, path);
    else if (key == "device_threads") cfg.device_threads = r.as_uint(v, path);
    else if (key == "divergence_guard") cfg.divergence_guard = r.as_number(v, path);
    else r.fail(path, "unknown key `" + key + "`");
  } catch (const std::invalid_argument& e) {
    r.fail(path, e.what());
  }
}

bool is_experiment_key(std::string_view key) {
  for (std::string_view k : {"method", "N", "H", "d", "Q", "T", "gamma", "sigma_H",
                             "aggregator", "compressor", "attack", "schedule",
                             "byzantine_count", "data_seed", "x0", "log_stride",
                             "device_threads", "divergence_guard"}) {
    if (k == key) return true;
  }
  return false;
}

std::string default_label(const ExperimentConfig& c) {
  std::string label(method_name(c.method));
  if (c.method == Method::kLad || c.method == Method::kComLad) {
    label += " d=" + std::to_string(c.load);
  }
  return label;
}

std::string axis_value_text(const Json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

// Points a validation error at the key it names, in the run or in `base`.
std::string field_path(const Json& root, const std::string& run_path, const std::string& msg) {
  const std::string marker = "config field `";
  const auto a = msg.find(marker);
  if (a == std::string::npos) return run_path;
  const auto b = msg.find('`', a + marker.size());
  if (b == std::string::npos) return run_path;
  const std::string key = msg.substr(a + marker.size(), b - a - marker.size());
  const Json& run = root["runs"][std::stoul(run_path.substr(run_path.rfind('/') + 1))];
  if (run.contains(key)) return run_path + "/" + key;
  if (root.contains("base") && root["base"].contains(key)) return "/base/" + key;
  return run_path;
}

std::vector<RunSpec> read_runs(const Reader& r, const Json& root,
                               const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig base;
  base.aggregator.clear();
  if (root.contains("base")) {
    const Json& b = root["base"];
    r.require_object(b, "/base");
    for (const auto& [key, value] : b.items()) {
      apply_experiment_field(r, base, key, value, "/base/" + key);
    }
  }

  // Sweep axes: cartesian product, first axis outermost.
  std::vector<std::pair<std::string, std::vector<Json>>> axes;
  if (root.contains("sweep")) {
    const Json& s = root["sweep"];
    r.require_object(s, "/sweep");
    for (const auto& [key, values] : s.items()) {
      const std::string path = "/sweep/" + key;
      if (!is_experiment_key(key)) r.fail(path, "unknown sweep axis `" + key + "`");
      r.as_array(values, path);
      axes.emplace_back(key, std::vector<Json>(values.begin(), values.end()));
    }
  }

  std::vector<RunSpec> out;
  const Json& runs = r.as_array(root["runs"], "/runs");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::string run_path = "/runs/" + std::to_string(i);
    const Json& run = runs[i];
    r.require_object(run, run_path);
    ExperimentConfig cfg = base;
    std::optional<std::string> label;
    for (const auto& [key, value] : run.items()) {
      if (key == "label") label = r.as_string(value, run_path + "/label");
      else apply_experiment_field(r, cfg, key, value, run_path + "/" + key);
    }

    std::vector<std::size_t> pick(axes.size(), 0);
    bool any_empty = false;
    for (const auto& axis : axes) any_empty = any_empty || axis.second.empty();
    if (any_empty) continue;
    while (true) {
      ExperimentConfig swept = cfg;
      std::string suffix;
      for (std::size_t a = 0; a < axes.size(); ++a) {
        const Json& v = axes[a].second[pick[a]];
        apply_experiment_field(r, swept, axes[a].first, v,
                               "/sweep/" + axes[a].first + "/" + std::to_string(pick[a]));
        suffix += " " + axes[a].first + "=" + axis_value_text(v);
      }
      std::string final_label;
      if (label) final_label = *label + suffix;
      else if (axes.empty()) final_label = default_label(swept);
      else final_label = std::string(method_name(swept.method)) + suffix;
      for (std::uint64_t seed : seeds) {
        ExperimentConfig c = swept;
        c.seed = seed;
        try {
          c.validate();
        } catch (const std::invalid_argument& e) {
          r.fail(field_path(root, run_path, e.what()), "run `" + final_label + "`: " + e.what());
        }
        out.push_back({final_label, c});
      }
      std::size_t a = axes.size();
      while (a > 0) {
        --a;
        if (++pick[a] < axes[a].second.size()) break;
        pick[a] = 0;
        if (a == 0) {
          a = axes.size() + 1;
          break;
        }
      }
      if (axes.empty() || a == axes.size() + 1) break;
    }
  }
  return out;
}

TheorySection read_theory(const Reader& r, const Json& t) {
  const std::string base = "/theory";
  r.check_keys(t, base, {"N", "H", "d", "kappa", "beta", "delta", "L", "gamma0",
                         "F0_minus_Fstar", "curves", "delta_grid", "d_values", "mode"});
  TheorySection s;
  TheoryParams& p = s.params;
  for (const auto& [key, v] : t.items()) {
    const std::string path = base + "/" + key;
    if (key == "N") p.N = r.as_uint(v, path);
    else if (key == "H") p.H = r.as_uint(v, path);
    else if (key == "d") p.d = r.as_uint(v, path);
    else if (key == "kappa") p.kappa = r.as_number(v, path);
    else if (key == "beta") p.beta = r.as_number(v, path);
    else if (key == "delta") p.delta = r.as_number(v, path);
    else if (key == "L") p.L = r.as_number(v, path);
    else if (key == "gamma0") p.gamma0 = r.as_number(v, path);
    else if (key == "F0_minus_Fstar") p.F0_minus_Fstar = r.as_number(v, path);
    else if (key == "curves") {
      s.delta_curve = s.d_curve = false;
      const Json& arr = r.as_array(v, path);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string name = r.as_string(arr[i], path + "/" + std::to_string(i));
        if (name == "delta") s.delta_curve = true;
        else if (name == "d") s.d_curve = true;
        else r.fail(path + "/" + std::to_string(i), "curve must be `delta` or `d`");
      }
    } else if (key == "delta_grid") {
      const Json& arr = r.as_array(v, path);
      if (arr.size() != 3) r.fail(path, "expected [lo, hi, step]");
      try {
        s.deltas = linear_grid(r.as_number(arr[0], path + "/0"), r.as_number(arr[1], path + "/1"),
                               r.as_number(arr[2], path + "/2"));
      } catch (const std::invalid_argument& e) {
        r.fail(path, e.what());
      }
    } else if (key == "d_values") {
      const Json& arr = r.as_array(v, path);
      for (std::size_t i = 0; i < arr.size(); ++i) {
        s.loads.push_back(r.as_uint(arr[i], path + "/" + std::to_string(i)));
      }
    } else if (key == "mode") {
      const std::string m = r.as_string(v, path);
      if (m == "asymptotic") s.mode = CurveMode::kAsymptotic;
      else if (m == "full") s.mode = CurveMode::kFull;
      else r.fail(path, "mode must be `asymptotic` or `full`");
    }
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    r.fail(base, e.what());
  }
  if (s.deltas.empty()) s.deltas = linear_grid(0.0, 3.0, 0.05);
  if (s.loads.empty()) {
    for (std::size_t d = 1; d <= p.N; ++d) s.loads.push_back(d);
  }
  for (std::size_t d : s.loads) {
    if (d < 1 || d > p.N) r.fail(base + "/d_values", "every d must satisfy 1 <= d <= N");
  }
  return s;
}

VerifySection read_verify(const Reader& r, const Json& v) {
  const std::string base = "/verify";
  r.check_keys(v, base, {"lemma1_max_n", "encoder_max_n", "sparsify_max_q",
                         "quantize_samples", "lemma_samples", "seed"});
  VerifySection s;
  for (const auto& [key, value] : v.items()) {
    const std::string path = base + "/" + key;
    const std::uint64_t n = r.as_uint(value, path);
    if (key == "lemma1_max_n") s.lemma1_max_n = n;
    else if (key == "encoder_max_n") s.encoder_max_n = n;
    else if (key == "sparsify_max_q") s.sparsify_max_q = n;
    else if (key == "quantize_samples") s.quantize_samples = n;
    else if (key == "lemma_samples") s.lemma_samples = n;
    else s.seed = n;
  }
  if (s.encoder_max_n > kMaxExactEncoderN) {
    r.fail(base + "/encoder_max_n", "exact encoder enumeration supports N <= " +
                                        std::to_string(kMaxExactEncoderN));
  }
  if (s.lemma1_max_n > 16) r.fail(base + "/lemma1_max_n", "must be <= 16");
  if (s.sparsify_max_q > 16) r.fail(base + "/sparsify_max_q", "must be <= 16");
  if (s.quantize_samples < 2 || s.lemma_samples < 2) {
    r.fail(base, "sample counts must be >= 2");
  }
  return s;
}

}  // namespace

ConfigFile parse_config(std::string_view text, const std::string& source) {
  const Reader r(text, source);
  const Json& root = r.root();
  r.check_keys(root, "", {"license", "name", "description", "notes", "seeds", "jobs", "base", "runs",
                          "sweep", "theory", "verify", "plot"});
  ConfigFile cfg;
  if (root.contains("name")) cfg.name = r.as_string(root["name"], "/name");
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos) {
    r.fail("/name", "name must be a non-empty plain file name");
  }
  if (root.contains("description")) {
    cfg.description = r.as_string(root["description"], "/description");
  }
  if (root.contains("jobs")) cfg.jobs = r.as_uint(root["jobs"], "/jobs");
  if (root.contains("seeds")) {
    cfg.seeds.clear();
    const Json& arr = r.as_array(root["seeds"], "/seeds");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.seeds.push_back(r.as_uint(arr[i], "/seeds/" + std::to_string(i)));
    }
  }
  if ((root.contains("base") || root.contains("sweep")) && !root.contains("runs")) {
    r.fail("", "`base`/`sweep` given without `runs`");
  }
  if (root.contains("runs")) cfg.runs = read_runs(r, root, cfg.seeds);
  if (root.contains("theory")) cfg.theory = read_theory(r, root["theory"]);
  if (root.contains("verify")) cfg.verify = read_verify(r, root["verify"]);
  if (root.contains("plot")) {
    const Json& p = root["plot"];
    r.check_keys(p, "/plot", {"log_y", "title"});
    if (p.contains("log_y")) cfg.plot.log_y = r.as_bool(p["log_y"], "/plot/log_y");
    if (p.contains("title")) cfg.plot.title = r.as_string(p["title"], "/plot/title");
  }
  return cfg;
}

ConfigFile load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const detail::PresetEntry* e = detail::kPresets; e->name != nullptr; ++e) {
    names.emplace_back(e->name);
  }
  return names;
}

std::optional<std::string_view> preset_text(std::string_view name) {
  for (const detail::PresetEntry* e = detail::kPresets; e->name != nullptr; ++e) {
    if (name == e->name) return std::string_view(e->text);
  }
  return std::nullopt;
}

ConfigFile load_preset(std::string_view name) {
  const auto text = preset_text(name);
  if (!text) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset `" + std::string(name) + "` (known: " + known + ")");
  }
  return parse_config(*text, "preset:" + std::string(name));
}

}  // namespace bygrad::cli
