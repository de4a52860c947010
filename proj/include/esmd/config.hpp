#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "esmd/errors.hpp"
#include "esmd/model.hpp"

namespace esmd {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

using ConfigScalar = std::variant<bool, double, std::string>;
using ConfigValue = std::variant<bool, double, std::string, std::vector<ConfigScalar>>;

// Flat TOML subset: [section] headers, key = value, strings in double quotes,
// numbers, true/false, one-level arrays, and # comments.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::filesystem::path& path);

  // Keys outside any section live in section "".
  const std::map<std::string, std::map<std::string, ConfigValue>>& sections() const noexcept { return sections_; }
  void set(const std::string& section, const std::string& key, ConfigValue value);

 private:
  std::map<std::string, std::map<std::string, ConfigValue>> sections_;
};

enum class Experiment { MinimaxRate, PathStudy, Comparison, WidthSweep, CheckPotentials };

std::string to_string(Experiment e);
Experiment parse_experiment(const std::string& text);

struct ExperimentConfig {
  Experiment experiment = Experiment::MinimaxRate;
  std::vector<Index> n_values;
  std::vector<Index> d_values;
  std::vector<double> p_values;
  std::vector<double> tau_values;
  std::vector<std::string> potentials;
  std::size_t replicates = 1;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "esmd_out";
  bool d_equals_n = true;  // minimax_rate ties d to n unless overridden

  std::string body = "l1";  // l1 | l2 | lp (uses body_p) | cube
  double body_p = 1.5;
  std::optional<double> epsilon;
  double delta = 0.05;
  double eta_scale = 1.0;
  std::size_t max_iters = 200000;
  std::size_t record_every = 1;
  double dt = 0.01;
  std::string integrator = "rk4";  // rk4 | implicit_euler, for continuous-time potentials
  std::optional<double> lse_tol;
  std::size_t lse_max_iters = 100000;
  double inner_tol = 1e-4;
  double width_tol = 0.5;
  std::size_t width_samples = 100;
  std::vector<double> r_values;
  std::size_t check_samples = 1000;
  std::size_t random_probes = 10;
  std::string probes = "default";  // default (signed vertices + boundary) | e1 | zero
  double noise_sd = 1.0;
  bool compute_bound = true;
};

// Defaults for the experiment, overlaid with top-level keys and then the
// section named after the experiment. Unknown keys are errors.
ExperimentConfig make_config(const ConfigDocument& doc);
ExperimentConfig default_config(Experiment e);
void validate(const ExperimentConfig& cfg);

}  // namespace esmd
