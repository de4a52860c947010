#include "esmd/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace esmd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("config line " + std::to_string(line) + ": " + msg);
}

ConfigScalar parse_scalar(const std::string& raw, int line) {
  const std::string t = trim(raw);
  if (t.empty()) fail(line, "missing value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"') fail(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
      if (t[i] == '\\' && i + 2 < t.size()) ++i;
      out += t[i];
    }
    return out;
  }
  if (t == "true") return true;
  if (t == "false") return false;
  std::string digits;
  for (char c : t)
    if (c != '_') digits += c;
  double v = 0.0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) fail(line, "cannot parse value '" + t + "'");
  return v;
}

std::vector<std::string> split_array(const std::string& body, int line) {
  std::vector<std::string> items;
  std::string current;
  bool quoted = false;
  for (char c : body) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      items.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (quoted) fail(line, "unterminated string in array");
  if (!trim(current).empty()) items.push_back(current);
  return items;
}

const ConfigValue* find(const std::map<std::string, ConfigValue>& m, const std::string& key) {
  const auto it = m.find(key);
  return it == m.end() ? nullptr : &it->second;
}

double as_number(const ConfigValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("config key '" + key + "' must be a number");
}

std::vector<double> as_numbers(const ConfigValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return {*d};
  const auto* arr = std::get_if<std::vector<ConfigScalar>>(&v);
  if (!arr) throw ConfigError("config key '" + key + "' must be a number list");
  std::vector<double> out;
  for (const auto& s : *arr) {
    const auto* d = std::get_if<double>(&s);
    if (!d) throw ConfigError("config key '" + key + "' must hold numbers only");
    out.push_back(*d);
  }
  return out;
}

std::vector<std::string> as_strings(const ConfigValue& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return {*s};
  const auto* arr = std::get_if<std::vector<ConfigScalar>>(&v);
  if (!arr) throw ConfigError("config key '" + key + "' must be a string list");
  std::vector<std::string> out;
  for (const auto& s : *arr) {
    const auto* str = std::get_if<std::string>(&s);
    if (!str) throw ConfigError("config key '" + key + "' must hold strings only");
    out.push_back(*str);
  }
  return out;
}

std::size_t as_count(const ConfigValue& v, const std::string& key) {
  const double d = as_number(v, key);
  if (!(d >= 0.0) || d != std::floor(d) || d > 9.0e15) throw ConfigError("config key '" + key + "' must be a count");
  return static_cast<std::size_t>(d);
}

std::vector<Index> as_counts(const ConfigValue& v, const std::string& key) {
  std::vector<Index> out;
  for (double d : as_numbers(v, key)) {
    if (!(d >= 1.0) || d != std::floor(d)) throw ConfigError("config key '" + key + "' must hold positive integers");
    out.push_back(static_cast<Index>(d));
  }
  return out;
}

bool as_bool(const ConfigValue& v, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("config key '" + key + "' must be true or false");
}

std::string as_string(const ConfigValue& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("config key '" + key + "' must be a string");
}

void apply(ExperimentConfig& cfg, const std::string& key, const ConfigValue& v) {
  using Setter = std::function<void(ExperimentConfig&, const ConfigValue&)>;
  static const std::map<std::string, Setter> setters = {
      {"n", [](auto& c, const auto& x) { c.n_values = as_counts(x, "n"); }},
      {"d", [](auto& c, const auto& x) { c.d_values = as_counts(x, "d"); }},
      {"p", [](auto& c, const auto& x) { c.p_values = as_numbers(x, "p"); }},
      {"tau", [](auto& c, const auto& x) { c.tau_values = as_numbers(x, "tau"); }},
      {"potentials", [](auto& c, const auto& x) { c.potentials = as_strings(x, "potentials"); }},
      {"replicates", [](auto& c, const auto& x) { c.replicates = as_count(x, "replicates"); }},
      {"base_seed", [](auto& c, const auto& x) { c.base_seed = as_count(x, "base_seed"); }},
      {"output_dir", [](auto& c, const auto& x) { c.output_dir = as_string(x, "output_dir"); }},
      {"d_equals_n", [](auto& c, const auto& x) { c.d_equals_n = as_bool(x, "d_equals_n"); }},
      {"body", [](auto& c, const auto& x) { c.body = as_string(x, "body"); }},
      {"body_p", [](auto& c, const auto& x) { c.body_p = as_number(x, "body_p"); }},
      {"epsilon", [](auto& c, const auto& x) { c.epsilon = as_number(x, "epsilon"); }},
      {"delta", [](auto& c, const auto& x) { c.delta = as_number(x, "delta"); }},
      {"eta_scale", [](auto& c, const auto& x) { c.eta_scale = as_number(x, "eta_scale"); }},
      {"max_iters", [](auto& c, const auto& x) { c.max_iters = as_count(x, "max_iters"); }},
      {"record_every", [](auto& c, const auto& x) { c.record_every = as_count(x, "record_every"); }},
      {"dt", [](auto& c, const auto& x) { c.dt = as_number(x, "dt"); }},
      {"integrator", [](auto& c, const auto& x) { c.integrator = as_string(x, "integrator"); }},
      {"lse_tol", [](auto& c, const auto& x) { c.lse_tol = as_number(x, "lse_tol"); }},
      {"lse_max_iters", [](auto& c, const auto& x) { c.lse_max_iters = as_count(x, "lse_max_iters"); }},
      {"inner_tol", [](auto& c, const auto& x) { c.inner_tol = as_number(x, "inner_tol"); }},
      {"width_tol", [](auto& c, const auto& x) { c.width_tol = as_number(x, "width_tol"); }},
      {"width_samples", [](auto& c, const auto& x) { c.width_samples = as_count(x, "width_samples"); }},
      {"r", [](auto& c, const auto& x) { c.r_values = as_numbers(x, "r"); }},
      {"check_samples", [](auto& c, const auto& x) { c.check_samples = as_count(x, "check_samples"); }},
      {"random_probes", [](auto& c, const auto& x) { c.random_probes = as_count(x, "random_probes"); }},
      {"probes", [](auto& c, const auto& x) { c.probes = as_string(x, "probes"); }},
      {"noise_sd", [](auto& c, const auto& x) { c.noise_sd = as_number(x, "noise_sd"); }},
      {"compute_bound", [](auto& c, const auto& x) { c.compute_bound = as_bool(x, "compute_bound"); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, v);
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  doc.sections_[""];
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string t = trim(strip_comment(raw));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail(line, "malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) fail(line, "empty section name");
      doc.sections_[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    for (char c : key)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) fail(line, "invalid key '" + key + "'");
    auto& target = doc.sections_[section];
    if (target.count(key)) fail(line, "duplicate key '" + key + "'");
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') fail(line, "unterminated array");
      std::vector<ConfigScalar> items;
      for (const auto& item : split_array(value.substr(1, value.size() - 2), line))
        items.push_back(parse_scalar(item, line));
      target[key] = std::move(items);
    } else {
      std::visit([&](auto&& s) { target[key] = s; }, parse_scalar(value, line));
    }
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

void ConfigDocument::set(const std::string& section, const std::string& key, ConfigValue value) {
  sections_[section][key] = std::move(value);
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::MinimaxRate: return "minimax_rate";
    case Experiment::PathStudy: return "path_study";
    case Experiment::Comparison: return "comparison";
    case Experiment::WidthSweep: return "width_sweep";
    case Experiment::CheckPotentials: return "check_potentials";
  }
  return "unknown";
}

Experiment parse_experiment(const std::string& text) {
  for (Experiment e : {Experiment::MinimaxRate, Experiment::PathStudy, Experiment::Comparison,
                       Experiment::WidthSweep, Experiment::CheckPotentials})
    if (to_string(e) == text) return e;
  throw ConfigError("unknown experiment '" + text + "'");
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::MinimaxRate:
      c.n_values = {10, 20, 40, 80, 160, 320, 640};
      c.p_values = {1.0, 1.25, 1.5, 1.75, 2.0};
      c.tau_values = {1.0};
      c.replicates = 20;
      break;
    case Experiment::PathStudy:
      c.n_values = {100};
      c.d_values = {100};
      c.tau_values = {1.0};
      c.potentials = {"squared_lp", "huber", "hypentropy", "sigmoidal"};
      c.replicates = 50;
      c.epsilon = 0.1;
      c.max_iters = 20000;
      c.integrator = "implicit_euler";
      c.record_every = 10;
      break;
    case Experiment::Comparison:
      c.n_values = {50};
      c.d_values = {50};
      c.tau_values = {1.0};
      c.potentials = {"huber"};
      c.replicates = 100;
      break;
    case Experiment::WidthSweep:
      c.n_values = {50};
      c.d_values = {50};
      c.tau_values = {1.0};
      c.replicates = 1;
      c.width_samples = 200;
      c.r_values = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
      break;
    case Experiment::CheckPotentials:
      c.d_values = {4, 16, 64};
      c.tau_values = {0.5, 1.0, 4.0};
      c.potentials = {"squared_lp", "huber", "hypentropy", "sigmoidal", "log_sum_exp"};
      break;
  }
  c.d_equals_n = e == Experiment::MinimaxRate;
  return c;
}

ExperimentConfig make_config(const ConfigDocument& doc) {
  const auto& sections = doc.sections();
  const auto top = sections.find("");
  const ConfigValue* name = top == sections.end() ? nullptr : find(top->second, "experiment");
  if (!name) throw ConfigError("config must set experiment = \"...\"");
  const Experiment e = parse_experiment(as_string(*name, "experiment"));
  ExperimentConfig cfg = default_config(e);
  auto overlay = [&](const std::string& section) {
    const auto it = sections.find(section);
    if (it == sections.end()) return;
    for (const auto& [key, value] : it->second)
      if (key != "experiment") apply(cfg, key, value);
  };
  overlay("");
  overlay(to_string(e));
  validate(cfg);
  return cfg;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  switch (cfg.experiment) {
    case Experiment::MinimaxRate:
      require(!cfg.n_values.empty() && !cfg.p_values.empty(), "minimax_rate: grid of n and p must be non-empty");
      require(cfg.d_equals_n || cfg.d_values.size() == cfg.n_values.size(),
              "minimax_rate: with d_equals_n = false, d must list one value per n");
      for (double p : cfg.p_values) require(p >= 1.0 && p <= 2.0, "minimax_rate: p must lie in [1, 2]");
      break;
    case Experiment::PathStudy:
    case Experiment::Comparison:
    case Experiment::WidthSweep:
      require(!cfg.n_values.empty() && !cfg.d_values.empty() && !cfg.tau_values.empty(),
              to_string(cfg.experiment) + ": grid of n, d and tau must be non-empty");
      break;
    case Experiment::CheckPotentials:
      require(!cfg.d_values.empty() && !cfg.tau_values.empty() && !cfg.potentials.empty(),
              "check_potentials: grid of d, tau and potentials must be non-empty");
      break;
  }
  if (cfg.experiment == Experiment::PathStudy || cfg.experiment == Experiment::Comparison)
    require(!cfg.potentials.empty(), to_string(cfg.experiment) + ": potentials must be non-empty");
  for (double t : cfg.tau_values) require(t > 0.0, "tau must be positive");
  if (cfg.epsilon) require(*cfg.epsilon > 0.0, "epsilon must be positive");
  require(cfg.delta > 0.0 && cfg.delta < 1.0, "delta must lie in (0, 1)");
  require(cfg.eta_scale > 0.0, "eta_scale must be positive");
  require(cfg.record_every >= 1, "record_every must be >= 1");
  require(cfg.dt > 0.0, "dt must be positive");
  require(cfg.integrator == "rk4" || cfg.integrator == "implicit_euler", "integrator must be rk4 or implicit_euler");
  require(cfg.inner_tol > 0.0 && cfg.width_tol > 0.0, "width tolerances must be positive");
  require(cfg.width_samples >= 30, "width_samples must be >= 30");
  require(cfg.noise_sd >= 0.0, "noise_sd must be non-negative");
  require(cfg.probes == "default" || cfg.probes == "e1" || cfg.probes == "zero",
          "probes must be default, e1 or zero");
}

}  // namespace esmd
