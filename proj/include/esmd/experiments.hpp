#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "esmd/config.hpp"
#include "esmd/convex_body.hpp"
#include "esmd/csv.hpp"
#include "esmd/potential.hpp"

namespace esmd {

struct SlopeFit {
  double p = 0.0;
  double tau = 1.0;
  double fitted_slope = 0.0;
  double target_slope = 0.0;  // 1/2 - 1/p
  double residual = 0.0;      // least-squares residual of the log-log fit
  std::size_t n_points = 0;
};

struct RunOptions {
  unsigned threads = 1;
  bool timestamp = true;  // leading "# generated ..." line in every CSV
};

struct ExperimentResult {
  Experiment experiment = Experiment::MinimaxRate;
  std::vector<std::pair<std::string, CsvTable>> tables;  // file name, contents
  std::string summary_json;
  std::vector<SlopeFit> slopes;  // minimax_rate only
  int exit_code = 0;

  const CsvTable& table(const std::string& file) const;
};

// "l1", "l2", "cube", or "lp" with `p`.
ConvexBody make_named_body(const std::string& name, Index d, double p);
// Potential by name with optional "name:key=value,key=value" overrides of
// the tabulated parameters. Also returns the body its constants refer to
// when it differs from `body` (log_sum_exp uses the cube).
std::pair<Potential, ConvexBody> make_named_potential(const std::string& spec, const ConvexBody& body, Index d,
                                                      double tau);

SlopeFit fit_slope(const std::vector<double>& n_values, const std::vector<double>& mean_risks, double p);

ExperimentResult run_minimax_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_path_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_comparison(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_width_sweep(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_check_potentials(const ExperimentConfig& cfg, const RunOptions& options = {});
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Writes every table and summary.json under cfg.output_dir.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace esmd
