#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "esmd/config.hpp"
#include "esmd/experiments.hpp"
#include "esmd/parallel.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 3;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out;
  bool no_timestamp = false;
  std::vector<std::string> overrides;  // key=value, applied after the file

  void attach(CLI::App& app) {
    app.add_option("--seed", seed, "Base seed for every random stream");
    app.add_option("--threads", threads, "Worker threads (default: ESMD_THREADS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory");
    app.add_flag("--no-timestamp", no_timestamp, "Omit the generated-at line so reruns are byte-identical");
    app.add_option("--set", overrides, "Override a config key, e.g. --set replicates=5");
  }
};

// Flags win over file values: they are written into the experiment's own
// section, which is applied last.
esmd::ExperimentConfig resolve(esmd::ConfigDocument doc, const CommonFlags& flags) {
  const auto& top = doc.sections().at("");
  const auto name = top.find("experiment");
  if (name == top.end()) throw esmd::ConfigError("config must set experiment = \"...\"");
  const auto* text = std::get_if<std::string>(&name->second);
  if (!text) throw esmd::ConfigError("experiment must be a string");
  const std::string section = esmd::to_string(esmd::parse_experiment(*text));
  for (const std::string& kv : flags.overrides) {
    const esmd::ConfigDocument one = esmd::ConfigDocument::parse(kv);
    for (const auto& [key, value] : one.sections().at("")) doc.set(section, key, value);
  }
  if (flags.seed) doc.set(section, "base_seed", static_cast<double>(*flags.seed));
  if (flags.out) doc.set(section, "output_dir", *flags.out);
  return esmd::make_config(doc);
}

int execute(const esmd::ExperimentConfig& cfg, const CommonFlags& flags) {
  esmd::RunOptions options;
  options.threads = flags.threads.value_or(esmd::default_threads());
  options.timestamp = !flags.no_timestamp;
  const esmd::ExperimentResult result = esmd::run_experiment(cfg, options);
  esmd::write_outputs(result, cfg.output_dir);
  for (const auto& [file, table] : result.tables)
    std::cout << (cfg.output_dir / file).string() << "  (" << table.rows() << " rows)\n";
  std::cout << (cfg.output_dir / "summary.json").string() << "\n";
  if (result.exit_code != 0) std::cerr << "esmd: " << esmd::to_string(cfg.experiment) << " reported failures\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-stopped mirror descent experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run_flags.attach(*run);

  CommonFlags check_flags;
  std::vector<double> check_d, check_tau;
  std::vector<std::string> check_potentials;
  std::optional<std::size_t> check_samples;
  CLI::App* check = app.add_subcommand("check-potentials", "Run the assumption checker over a grid");
  check->add_option("--d", check_d, "Dimensions");
  check->add_option("--tau", check_tau, "Radii");
  check->add_option("--potentials", check_potentials, "Potential names, optionally name:key=value");
  check->add_option("--samples", check_samples, "Samples per check");
  check_flags.attach(*check);

  CommonFlags width_flags;
  std::optional<double> width_n, width_d;
  std::vector<double> width_tau, width_r;
  std::optional<std::string> width_body;
  std::optional<std::size_t> width_samples;
  CLI::App* width = app.add_subcommand("width", "Localized Gaussian width sweep on a Gaussian design");
  width->add_option("--n", width_n, "Rows");
  width->add_option("--d", width_d, "Columns");
  width->add_option("--tau", width_tau, "Radii of the constraint set");
  width->add_option("--r", width_r, "Localization radii");
  width->add_option("--body", width_body, "l1, l2, lp or cube");
  width->add_option("--samples", width_samples, "Monte Carlo samples");
  width_flags.attach(*width);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return execute(resolve(esmd::ConfigDocument::load(config_path), run_flags), run_flags);
    if (*check) {
      esmd::ConfigDocument doc = esmd::ConfigDocument::parse("experiment = \"check_potentials\"");
      if (!check_d.empty()) doc.set("", "d", std::vector<esmd::ConfigScalar>(check_d.begin(), check_d.end()));
      if (!check_tau.empty()) doc.set("", "tau", std::vector<esmd::ConfigScalar>(check_tau.begin(), check_tau.end()));
      if (!check_potentials.empty())
        doc.set("", "potentials",
                std::vector<esmd::ConfigScalar>(check_potentials.begin(), check_potentials.end()));
      if (check_samples) doc.set("", "check_samples", static_cast<double>(*check_samples));
      if (!check_flags.out) check_flags.out = "esmd_check";
      return execute(resolve(doc, check_flags), check_flags);
    }
    if (*width) {
      esmd::ConfigDocument doc = esmd::ConfigDocument::parse("experiment = \"width_sweep\"");
      if (width_n) doc.set("", "n", *width_n);
      if (width_d) doc.set("", "d", *width_d);
      if (!width_tau.empty()) doc.set("", "tau", std::vector<esmd::ConfigScalar>(width_tau.begin(), width_tau.end()));
      if (!width_r.empty()) doc.set("", "r", std::vector<esmd::ConfigScalar>(width_r.begin(), width_r.end()));
      if (width_body) doc.set("", "body", *width_body);
      if (width_samples) doc.set("", "width_samples", static_cast<double>(*width_samples));
      if (!width_flags.out) width_flags.out = "esmd_width";
      return execute(resolve(doc, width_flags), width_flags);
    }
  } catch (const esmd::ConfigError& e) {
    std::cerr << "esmd: " << e.what() << "\n";
    return kUsageError;
  } catch (const esmd::InvalidArgument& e) {
    std::cerr << "esmd: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "esmd: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
