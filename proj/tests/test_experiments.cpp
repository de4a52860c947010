#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "esmd/config.hpp"
#include "esmd/csv.hpp"
#include "esmd/experiments.hpp"
#include "esmd/stats.hpp"

using namespace esmd;

namespace {

// Data lines of a CSV split on commas; no field produced here is quoted.
struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  std::vector<std::size_t> widths;  // field count of every non-comment line
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string field;
  while (std::getline(s, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

ParsedCsv parse_csv(const std::string& text) {
  ParsedCsv csv;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    const auto fields = split(line);
    csv.widths.push_back(fields.size());
    if (csv.header.empty()) {
      csv.header = fields;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < fields.size() && i < csv.header.size(); ++i) row[csv.header[i]] = fields[i];
    csv.rows.push_back(row);
  }
  return csv;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) { return std::stod(row.at(key)); }

ExperimentConfig small_minimax() {
  ExperimentConfig cfg = default_config(Experiment::MinimaxRate);
  cfg.n_values = {10, 20, 40};
  cfg.p_values = {1.5, 2.0};
  cfg.replicates = 3;
  cfg.base_seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("slope fit recovers an exact power law") {
  const std::vector<double> ns = {10, 20, 40, 80, 160, 320, 640};
  for (double b : {-0.5, -0.3, 0.0, 0.25}) {
    std::vector<double> risks;
    for (double n : ns) risks.push_back(std::exp(1.7 + b * std::log(n)));
    const SlopeFit fit = fit_slope(ns, risks, 1.5);
    CHECK(std::abs(fit.fitted_slope - b) <= 1e-10);
    CHECK(fit.target_slope == doctest::Approx(0.5 - 1.0 / 1.5).epsilon(1e-15));
    CHECK(fit.residual <= 1e-20);
    CHECK(fit.n_points == ns.size());
  }
  CHECK_THROWS_AS(fit_slope({10, 20}, {1, 2}, 1.5), InvalidArgument);
  CHECK_THROWS_AS(fit_slope({10, 20, 40}, {1, 0, 2}, 1.5), InvalidArgument);
}

TEST_CASE("type 7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.2) == doctest::Approx(1.6));
  CHECK(quantile({4, 1, 3, 2}, 0.8) == doctest::Approx(3.4));
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK(quantile({1, 2, 3, 4}, 0.0) == 1.0);
  CHECK(quantile({1, 2, 3, 4}, 1.0) == 4.0);
}

TEST_CASE("single cell with one replicate writes one data row") {
  ExperimentConfig cfg = default_config(Experiment::MinimaxRate);
  cfg.n_values = {20};
  cfg.p_values = {1.5};
  cfg.replicates = 1;
  const ExperimentResult res = run_minimax_experiment(cfg, {1, false});
  const ParsedCsv risks = parse_csv(res.table("risks.csv").str());
  CHECK(risks.rows.size() == 1);
  CHECK(res.table("cells.csv").rows() == 1);
  // Too few points for a slope.
  CHECK(res.table("slopes.csv").rows() == 0);
  CHECK(res.slopes.empty());
  CHECK(num(risks.rows[0], "risk") > 0.0);
}

TEST_CASE("minimax outputs are identical across thread counts") {
  const ExperimentConfig cfg = small_minimax();
  const ExperimentResult one = run_minimax_experiment(cfg, {1, false});
  const ExperimentResult four = run_minimax_experiment(cfg, {4, false});
  REQUIRE(one.tables.size() == four.tables.size());
  for (std::size_t i = 0; i < one.tables.size(); ++i) CHECK(one.tables[i].second.str() == four.tables[i].second.str());
  CHECK(one.summary_json == four.summary_json);
  CHECK(one.slopes.size() == 2);

  const ExperimentResult stamped = run_minimax_experiment(cfg, {1, true});
  const std::string text = stamped.table("risks.csv").str();
  CHECK(text.rfind("# generated ", 0) == 0);
  // Dropping the stamp line gives the unstamped file back.
  CHECK(text.substr(text.find('\n') + 1) == one.table("risks.csv").str());
}

TEST_CASE("minimax cells carry quantiles and regime flags") {
  const ExperimentResult res = run_minimax_experiment(small_minimax(), {1, false});
  const ParsedCsv cells = parse_csv(res.table("cells.csv").str());
  REQUIRE(cells.rows.size() == 6);
  for (const auto& row : cells.rows) {
    CHECK(num(row, "q20_risk") <= num(row, "mean_risk") * (1 + 1e-12) + 1e-300);
    CHECK(num(row, "q20_risk") <= num(row, "q80_risk"));
    const bool edge = num(row, "p") == 2.0;
    CHECK((row.at("outside_regime") == "true") == edge);
  }
  for (const SlopeFit& fit : res.slopes) CHECK(fit.n_points == 3);
}

TEST_CASE("every table has a constant column count") {
  ExperimentConfig path = default_config(Experiment::PathStudy);
  path.n_values = {15};
  path.d_values = {12};
  path.replicates = 2;
  path.potentials = {"squared_lp", "sigmoidal"};
  path.max_iters = 300;
  const std::vector<ExperimentResult> results = {run_minimax_experiment(small_minimax(), {1, false}),
                                                 run_path_experiment(path, {1, false})};
  for (const auto& res : results)
    for (const auto& [name, table] : res.tables) {
      const ParsedCsv csv = parse_csv(table.str());
      INFO(name);
      REQUIRE(!csv.widths.empty());
      for (std::size_t w : csv.widths) CHECK(w == table.columns());
    }
}

TEST_CASE("config parsing") {
  const std::string text = R"(# experiment manifest
experiment = "minimax_rate"
base_seed = 42
output_dir = "runs/a"   # trailing comment

[minimax_rate]
n = [10, 20, 40]
p = [1.5]
replicates = 4
lse_tol = 1e-9
d_equals_n = true

[path_study]
replicates = 999
)";
  const ExperimentConfig cfg = make_config(ConfigDocument::parse(text));
  CHECK(cfg.experiment == Experiment::MinimaxRate);
  CHECK(cfg.base_seed == 42);
  CHECK(cfg.output_dir == std::filesystem::path("runs/a"));
  CHECK(cfg.n_values == std::vector<Index>{10, 20, 40});
  CHECK(cfg.p_values == std::vector<double>{1.5});
  // Sections of other experiments are ignored.
  CHECK(cfg.replicates == 4);
  REQUIRE(cfg.lse_tol.has_value());
  CHECK(*cfg.lse_tol == 1e-9);

  // The experiment section overrides top-level keys.
  ConfigDocument doc = ConfigDocument::parse("experiment = \"minimax_rate\"\nreplicates = 2\n[minimax_rate]\nreplicates = 7");
  CHECK(make_config(doc).replicates == 7);
  doc.set("minimax_rate", "replicates", 3.0);
  CHECK(make_config(doc).replicates == 3);

  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"nope\"")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("replicates = 2")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nbogus = 1")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nreplicates = 0")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nreplicates = 1.5")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nn = []")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\np = [3.0]")), ConfigError);
  CHECK_THROWS_AS(make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nn = \"ten\"")), ConfigError);
  CHECK_THROWS_AS(
      make_config(ConfigDocument::parse("experiment = \"minimax_rate\"\nd_equals_n = false\nd = [5]")),
      ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("a = 1\na = 2"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("[open"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("a = \"unterminated"), ConfigError);
  CHECK_THROWS_AS(ConfigDocument::parse("just words"), ConfigError);
}

TEST_CASE("path traces start at the null risk and quantiles are ordered") {
  ExperimentConfig cfg = default_config(Experiment::PathStudy);
  cfg.n_values = {30};
  cfg.d_values = {20};
  cfg.replicates = 3;
  cfg.potentials = {"squared_lp", "huber", "sigmoidal"};
  cfg.max_iters = 2000;
  cfg.record_every = 5;
  cfg.epsilon = 0.2;
  const ExperimentResult res = run_path_experiment(cfg, {1, false});
  const ParsedCsv runs = parse_csv(res.table("runs.csv").str());
  const ParsedCsv traces = parse_csv(res.table("traces.csv").str());
  REQUIRE(runs.rows.size() == 9);
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_run;
  std::map<std::pair<std::string, std::string>, double> first_t;
  for (const auto& row : traces.rows) {
    const auto key = std::make_pair(row.at("potential"), row.at("replicate"));
    if (!by_run.count(key)) first_t[key] = num(row, "t");
    by_run[key].push_back(num(row, "in_sample_risk"));
  }
  for (const auto& row : runs.rows) {
    if (row.at("diverged") == "true") continue;
    const auto key = std::make_pair(row.at("potential"), row.at("replicate"));
    REQUIRE(by_run.count(key));
    CHECK(first_t[key] == 0.0);
    const auto& risks = by_run[key];
    CHECK(risks.front() == doctest::Approx(num(row, "initial_risk")).epsilon(1e-12));
    CHECK(*std::min_element(risks.begin(), risks.end()) <= risks.front());
  }
  const ParsedCsv quant = parse_csv(res.table("trace_quantiles.csv").str());
  REQUIRE(!quant.rows.empty());
  for (const auto& row : quant.rows) CHECK(num(row, "q10_risk") <= num(row, "q90_risk"));
}

TEST_CASE("diverged runs are flagged and left out of the quantiles") {
  ExperimentConfig cfg = default_config(Experiment::PathStudy);
  cfg.n_values = {20};
  cfg.d_values = {10};
  cfg.replicates = 2;
  cfg.potentials = {"squared_lp"};
  cfg.eta_scale = 1e4;
  cfg.max_iters = 500;
  const ExperimentResult res = run_path_experiment(cfg, {1, false});
  const ParsedCsv runs = parse_csv(res.table("runs.csv").str());
  for (const auto& row : runs.rows) CHECK(row.at("diverged") == "true");
  CHECK(res.table("traces.csv").rows() == 0);
  CHECK(res.table("trace_quantiles.csv").rows() == 0);
}

TEST_CASE("assumption suite passes and catches an injected violation") {
  ExperimentConfig cfg = default_config(Experiment::CheckPotentials);
  cfg.d_values = {4, 16};
  cfg.tau_values = {1.0};
  cfg.check_samples = 200;
  const ExperimentResult ok = run_check_potentials(cfg, {1, false});
  CHECK(ok.exit_code == 0);
  CHECK(ok.table("assumption_reports.csv").rows() == cfg.potentials.size() * 2);

  cfg.potentials = {"hypentropy:gamma=1"};
  cfg.d_values = {16};
  const ExperimentResult bad = run_check_potentials(cfg, {1, false});
  CHECK(bad.exit_code != 0);
  const ParsedCsv rows = parse_csv(bad.table("assumption_reports.csv").str());
  REQUIRE(rows.rows.size() == 1);
  CHECK(rows.rows[0].at("passed") == "false");
  CHECK(num(rows.rows[0], "upper_bound_violations") > 0);

  cfg.potentials.clear();
  CHECK_THROWS_AS(run_check_potentials(cfg, {1, false}), ConfigError);
}

TEST_CASE("noiseless zero probe gives zero risk for both estimators") {
  ExperimentConfig cfg = default_config(Experiment::Comparison);
  cfg.n_values = {20};
  cfg.d_values = {15};
  cfg.replicates = 2;
  cfg.noise_sd = 0.0;
  cfg.probes = "zero";
  cfg.epsilon = 0.1;
  cfg.compute_bound = false;
  const ExperimentResult res = run_comparison(cfg, {1, false});
  const ParsedCsv probes = parse_csv(res.table("probe_risks.csv").str());
  REQUIRE(probes.rows.size() == 2);
  for (const auto& row : probes.rows) {
    CHECK(num(row, "esmd_risk") <= 1e-20);
    CHECK(num(row, "lse_risk") <= 1e-20);
    CHECK(row.at("bound_available") == "false");
  }
}

TEST_CASE("comparison rows cover every probe and seed") {
  ExperimentConfig cfg = default_config(Experiment::Comparison);
  cfg.n_values = {20};
  cfg.d_values = {6};
  cfg.replicates = 3;
  cfg.random_probes = 2;
  cfg.epsilon = 0.5;
  cfg.compute_bound = false;
  const ExperimentResult one = run_comparison(cfg, {1, false});
  const ExperimentResult three = run_comparison(cfg, {3, false});
  CHECK(one.table("probe_risks.csv").rows() == 3 * (2 * 6 + 2));
  CHECK(one.table("trials.csv").rows() == 3);
  CHECK(one.table("probe_risks.csv").str() == three.table("probe_risks.csv").str());
  const ParsedCsv trials = parse_csv(one.table("trials.csv").str());
  for (const auto& row : trials.rows) {
    CHECK(num(row, "ratio") == doctest::Approx(num(row, "sup_esmd_risk") / num(row, "sup_lse_risk")));
    CHECK(num(row, "ratio_limit") > 60.0);
  }
}

TEST_CASE("width sweep is non-decreasing in the radius") {
  ExperimentConfig cfg = default_config(Experiment::WidthSweep);
  cfg.n_values = {20};
  cfg.d_values = {10};
  cfg.width_samples = 60;
  cfg.r_values = {0.1, 0.5, 1.0, 2.0, 4.0};
  const ExperimentResult res = run_width_sweep(cfg, {1, false});
  const ParsedCsv widths = parse_csv(res.table("widths.csv").str());
  REQUIRE(widths.rows.size() == cfg.r_values.size());
  for (std::size_t k = 1; k < widths.rows.size(); ++k)
    CHECK(num(widths.rows[k], "width_mean") >=
          num(widths.rows[k - 1], "width_mean") - num(widths.rows[k], "solver_gap_max") -
              num(widths.rows[k - 1], "solver_gap_max"));
  CHECK(res.table("critical_radii.csv").rows() == 1);
}

TEST_CASE("named factories") {
  CHECK(make_named_body("l1", 3, 0).kind() == ConvexBody::Kind::LpBall);
  CHECK(make_named_body("cube", 3, 0).kind() == ConvexBody::Kind::PolytopeH);
  CHECK(make_named_body("lp", 3, 1.3).p() == 1.3);
  CHECK_THROWS_AS(make_named_body("l7", 3, 0), InvalidArgument);
  const ConvexBody l1 = ConvexBody::lp_ball(5, 1.0);
  CHECK(make_named_potential("huber", l1, 5, 1.0).first.kind() == PotentialKind::HuberMoreau);
  CHECK(make_named_potential("log_sum_exp", l1, 5, 1.0).second.kind() == ConvexBody::Kind::PolytopeH);
  CHECK(make_named_potential("hypentropy:gamma=0.5", l1, 5, 1.0).first.parameter("gamma") == 0.5);
  CHECK_THROWS_AS(make_named_potential("nope", l1, 5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_named_potential("huber:zeta=1", l1, 5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_named_potential("huber:lambda", l1, 5, 1.0), InvalidArgument);
}

TEST_CASE("outputs land on disk with a parseable summary") {
  ExperimentConfig cfg = small_minimax();
  const auto dir = std::filesystem::temp_directory_path() / "esmd_test_outputs";
  std::filesystem::remove_all(dir);
  const ExperimentResult res = run_minimax_experiment(cfg, {1, false});
  write_outputs(res, dir);
  for (const char* f : {"risks.csv", "cells.csv", "slopes.csv", "summary.json"})
    CHECK(std::filesystem::exists(dir / f));
  std::ifstream in(dir / "slopes.csv");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(text.str() == res.table("slopes.csv").str());
  std::filesystem::remove_all(dir);
}

TEST_CASE("csv formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CsvTable t({"a", "b"});
  CHECK_THROWS(t.add_row({1.0}));
}
