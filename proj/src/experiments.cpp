#include "esmd/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

#include "esmd/assumption.hpp"
#include "esmd/hard_design.hpp"
#include "esmd/lse.hpp"
#include "esmd/mirror_descent.hpp"
#include "esmd/parallel.hpp"
#include "esmd/stats.hpp"
#include "esmd/width.hpp"

namespace esmd {

namespace {

using json = nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Branch keys under a cell stream; fixed so that adding a branch never
// shifts the draws of another.
enum Branch : std::uint64_t { kDesign = 0, kProbes = 1, kEpsilonWidth = 2, kBoundWidth = 3, kNoise = 4 };

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Stamp {
  std::string line;  // empty when suppressed
  std::string identity;

  Stamp(const ExperimentConfig& cfg, const RunOptions& options)
      : line(options.timestamp ? "generated " + utc_now() : ""),
        identity("esmd " + to_string(cfg.experiment) + " base_seed=" + std::to_string(cfg.base_seed)) {}

  CsvTable table(std::vector<std::string> header) const {
    CsvTable t(std::move(header));
    if (!line.empty()) t.add_comment(line);
    t.add_comment(identity);
    return t;
  }

  json summary(const ExperimentConfig& cfg) const {
    json j;
    j["experiment"] = to_string(cfg.experiment);
    j["base_seed"] = cfg.base_seed;
    j["replicates"] = cfg.replicates;
    if (!line.empty()) j["generated"] = line.substr(10);
    return j;
  }
};

std::uint64_t as_u64(std::size_t v) { return static_cast<std::uint64_t>(v); }
std::int64_t as_i64(Index v) { return static_cast<std::int64_t>(v); }

Vector basis(Index d, Index i, double scale) {
  Vector v = Vector::Zero(d);
  v(i) = scale;
  return v;
}

double json_number(double v) { return std::isfinite(v) ? v : kNaN; }

struct GridCell {
  Index n = 0;
  Index d = 0;
  double tau = 1.0;
};

// Cartesian product of n, d and tau in that nesting order.
std::vector<GridCell> ndtau_grid(const ExperimentConfig& cfg) {
  std::vector<GridCell> cells;
  for (Index n : cfg.n_values)
    for (Index d : cfg.d_values)
      for (double tau : cfg.tau_values) cells.push_back({n, d, tau});
  return cells;
}

std::pair<std::string, std::map<std::string, double>> split_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  std::map<std::string, double> params;
  if (colon == std::string::npos) return {spec, params};
  std::stringstream rest(spec.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("potential parameter '" + item + "' must be key=value");
    try {
      params[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw InvalidArgument("potential parameter '" + item + "' is not numeric");
    }
  }
  return {spec.substr(0, colon), params};
}

Matrix cube_rows(Index d) {
  Matrix a = Matrix::Zero(2 * d, d);
  for (Index i = 0; i < d; ++i) {
    a(2 * i, i) = 1.0;
    a(2 * i + 1, i) = -1.0;
  }
  return a;
}

MdConfig md_config_for(const Potential& psi, const ExperimentConfig& cfg, double tau, double epsilon) {
  MdConfig md{.potential = psi, .tau = tau, .epsilon = epsilon};
  md.max_iters = cfg.max_iters;
  md.record_every = cfg.record_every;
  if (!psi.caps().discrete_ok)
    md.mode = ContinuousMode{cfg.dt, cfg.integrator == "rk4" ? Integrator::Rk4 : Integrator::ImplicitEuler};
  return md;
}

LseOptions lse_options(const ExperimentConfig& cfg) {
  LseOptions o;
  o.tol = cfg.lse_tol;
  o.max_iters = cfg.lse_max_iters;
  return o;
}

WidthOptions width_options(const ExperimentConfig& cfg, unsigned threads) {
  WidthOptions o;
  o.inner_tol = cfg.inner_tol;
  o.threads = threads;
  return o;
}

}  // namespace

const CsvTable& ExperimentResult::table(const std::string& file) const {
  for (const auto& [name, t] : tables)
    if (name == file) return t;
  throw InvalidArgument("experiment produced no table " + file);
}

ConvexBody make_named_body(const std::string& name, Index d, double p) {
  if (name == "l1") return ConvexBody::lp_ball(d, 1.0);
  if (name == "l2") return ConvexBody::lp_ball(d, 2.0);
  if (name == "lp") return ConvexBody::lp_ball(d, p);
  if (name == "cube") return ConvexBody::polytope_h(cube_rows(d));
  throw InvalidArgument("unknown body '" + name + "'");
}

std::pair<Potential, ConvexBody> make_named_potential(const std::string& spec, const ConvexBody& body, Index d,
                                                      double tau) {
  const auto [name, params] = split_spec(spec);
  auto take = [&params](const char* key) -> std::optional<double> {
    const auto it = params.find(key);
    return it == params.end() ? std::nullopt : std::optional<double>(it->second);
  };
  if (name == "squared_l2") {
    if (!params.empty()) throw InvalidArgument("squared_l2 takes no parameters");
    return {squared_l2(d), body};
  }
  if (name == "log_sum_exp") {
    const Matrix rows = cube_rows(d);
    return {make_msconvexhull_potential(rows, tau, static_cast<double>(d)), ConvexBody::polytope_h(rows)};
  }
  if (name == "smooth_norm") return {make_smooth_norm_potential(body, take("c_k").value_or(1.0)), body};
  if (name == "moreau") return {generic_moreau(body, take("lambda").value_or(0.05), take("rho").value_or(2.0)), body};
  const std::map<std::string, StandardPotential> aliases = {{"huber", StandardPotential::HuberMoreau},
                                                     {"hypentropy", StandardPotential::AdjHypentropy}};
  std::optional<StandardPotential> table = parse_standard_potential(name);
  if (const auto it = aliases.find(name); it != aliases.end()) table = it->second;
  if (!table) throw InvalidArgument("unknown potential '" + name + "'");
  StandardOverrides o;
  o.p = take("p");
  o.lambda = take("lambda");
  o.rho = take("rho");
  o.gamma = take("gamma");
  for (const auto& [key, value] : params)
    if (key != "p" && key != "lambda" && key != "rho" && key != "gamma")
      throw InvalidArgument("unknown parameter '" + key + "' for potential " + name);
  // Explicit parameters are taken as given, even outside the certified range.
  o.enforce_bounds = params.empty();
  return {make_standard_potential(*table, d, tau, o), body};
}

SlopeFit fit_slope(const std::vector<double>& n_values, const std::vector<double>& mean_risks, double p) {
  if (n_values.size() != mean_risks.size()) throw InvalidArgument("fit_slope: length mismatch");
  if (n_values.size() < 3) throw InvalidArgument("fit_slope: need at least 3 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (!(n_values[i] > 0.0) || !(mean_risks[i] > 0.0))
      throw InvalidArgument("fit_slope: values must be positive for a log-log fit");
    lx.push_back(std::log(n_values[i]));
    ly.push_back(std::log(mean_risks[i]));
  }
  const LineFit line = fit_line(lx, ly);
  SlopeFit fit;
  fit.p = p;
  fit.fitted_slope = line.slope;
  fit.target_slope = 0.5 - 1.0 / p;
  fit.residual = line.residual;
  fit.n_points = line.n_points;
  return fit;
}

// ---------------------------------------------------------------- minimax

ExperimentResult run_minimax_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  if (cfg.experiment != Experiment::MinimaxRate) throw InvalidArgument("run_minimax_experiment: wrong experiment");
  validate(cfg);
  const Stamp stamp(cfg, options);

  struct Cell {
    Index n, d;
    double p, tau;
    HardDesignShape shape;
    std::optional<DesignMatrix> design;
  };
  std::vector<Cell> cells;
  for (double tau : cfg.tau_values)
    for (double p : cfg.p_values)
      for (std::size_t i = 0; i < cfg.n_values.size(); ++i) {
        const Index n = cfg.n_values[i];
        const Index d = cfg.d_equals_n ? n : cfg.d_values[i];
        cells.push_back({n, d, p, tau, hard_design_shape(n, d, p), std::nullopt});
      }
  parallel_for(cells.size(), options.threads,
               [&](std::size_t c) { cells[c].design = build_hard_design(cells[c].n, cells[c].d, cells[c].p); });

  struct Slot {
    double risk = kNaN;
    bool partial = false;
    std::size_t iterations = 0;
    double gap = 0.0;
  };
  const std::size_t reps = cfg.replicates;
  std::vector<Slot> slots(cells.size() * reps);
  const RngStream root(cfg.base_seed);
  const LseOptions lse = lse_options(cfg);
  parallel_for(slots.size(), options.threads, [&](std::size_t u) {
    const Cell& cell = cells[u / reps];
    const RngStream stream = root.fork(u / reps).fork(u % reps);
    const ConvexBody body = ConvexBody::lp_ball(cell.d, cell.p);
    // Zero ground truth, so y is pure noise.
    const RegressionInstance inst =
        make_instance(*cell.design, draw_noise(stream, cell.n, cfg.noise_sd), Vector::Zero(cell.d));
    Slot& s = slots[u];
    try {
      const LseSolution sol = solve_lse(inst, body, cell.tau, lse);
      s = {lse_risk(inst, sol), false, sol.iterations, sol.fw_gap};
    } catch (const LsePartialResult& e) {
      s = {lse_risk(inst, e.partial()), true, e.partial().iterations, e.gap()};
    }
  });

  CsvTable risks = stamp.table({"n", "d", "p", "tau", "replicate", "risk", "partial", "iterations", "fw_gap"});
  CsvTable summary = stamp.table({"n", "d", "p", "tau", "mean_risk", "q20_risk", "q80_risk", "replicates",
                                  "partial_count", "block", "blocks", "clamped", "outside_regime"});
  CsvTable slopes = stamp.table({"p", "tau", "fitted_slope", "target_slope", "residual", "n_points"});
  bool any_outside = false;
  std::map<std::pair<double, double>, std::pair<std::vector<double>, std::vector<double>>> series;
  std::map<std::pair<double, double>, std::size_t> excluded;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    std::vector<double> values;
    std::size_t partial = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Slot& s = slots[c * reps + r];
      risks.add_row({as_i64(cell.n), as_i64(cell.d), cell.p, cell.tau, as_u64(r), s.risk, s.partial,
                     as_u64(s.iterations), s.gap});
      values.push_back(s.risk);
      partial += s.partial ? 1 : 0;
    }
    const double m = mean(values);
    summary.add_row({as_i64(cell.n), as_i64(cell.d), cell.p, cell.tau, m, quantile(values, 0.2),
                     quantile(values, 0.8), as_u64(reps), as_u64(partial), as_i64(cell.shape.block),
                     as_i64(cell.shape.blocks), cell.shape.clamped, cell.shape.outside_regime});
    any_outside = any_outside || cell.shape.outside_regime;
    auto& [xs, ys] = series[{cell.p, cell.tau}];
    if (partial == 0) {
      xs.push_back(static_cast<double>(cell.n));
      ys.push_back(m);
    } else {
      ++excluded[{cell.p, cell.tau}];
    }
  }
  if (any_outside)
    summary.add_comment(
        "cells with outside_regime=true violate p in (1,2) or n^(p/2) <= d <= n^(q/2); they are run with block "
        "sizes clamped to at least 1");

  ExperimentResult result;
  result.experiment = cfg.experiment;
  json fits = json::array();
  for (const auto& [key, xy] : series) {
    if (xy.first.size() < 3) continue;
    SlopeFit fit = fit_slope(xy.first, xy.second, key.first);
    fit.tau = key.second;
    slopes.add_row({fit.p, fit.tau, fit.fitted_slope, fit.target_slope, fit.residual, as_u64(fit.n_points)});
    fits.push_back({{"p", fit.p},
                    {"tau", fit.tau},
                    {"fitted_slope", fit.fitted_slope},
                    {"target_slope", fit.target_slope},
                    {"residual", fit.residual},
                    {"n_points", fit.n_points},
                    {"excluded_partial_cells", excluded[key]}});
    result.slopes.push_back(fit);
  }
  json j = stamp.summary(cfg);
  j["cells"] = cells.size();
  j["slopes"] = fits;
  j["outside_regime_cells_present"] = any_outside;
  result.summary_json = j.dump(2);
  result.tables.emplace_back("risks.csv", std::move(risks));
  result.tables.emplace_back("cells.csv", std::move(summary));
  result.tables.emplace_back("slopes.csv", std::move(slopes));
  return result;
}

// ---------------------------------------------------------------- path study

ExperimentResult run_path_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  if (cfg.experiment != Experiment::PathStudy) throw InvalidArgument("run_path_experiment: wrong experiment");
  validate(cfg);
  const Stamp stamp(cfg, options);
  const std::vector<GridCell> cells = ndtau_grid(cfg);
  const std::size_t reps = cfg.replicates;
  const std::size_t n_pot = cfg.potentials.size();
  const double epsilon = cfg.epsilon.value_or(0.1);

  struct Run {
    RiskTrace trace;
    bool diverged = false;
    double initial_risk = 0.0;
  };
  std::vector<Run> runs(cells.size() * reps * n_pot);
  const RngStream root(cfg.base_seed);
  parallel_for(cells.size() * reps, options.threads, [&](std::size_t u) {
    const GridCell& cell = cells[u / reps];
    const RngStream stream = root.fork(u / reps).fork(u % reps);
    const DesignMatrix x = sample_gaussian_design(cell.n, cell.d, stream.fork(kDesign));
    const Vector truth = basis(cell.d, 0, cell.tau);
    const RegressionInstance inst = sample_instance(x, truth, stream.fork(kNoise), cfg.noise_sd);
    const ConvexBody body = make_named_body(cfg.body, cell.d, cfg.body_p);
    for (std::size_t k = 0; k < n_pot; ++k) {
      Run& run = runs[u * n_pot + k];
      run.initial_risk = in_sample_risk(x, Vector::Zero(cell.d), truth);
      const Potential psi = make_named_potential(cfg.potentials[k], body, cell.d, cell.tau).first;
      MdConfig md = md_config_for(psi, cfg, cell.tau, epsilon);
      if (psi.caps().discrete_ok && cfg.eta_scale != 1.0)
        md.eta = cfg.eta_scale * resolve_step_size(inst, psi, cell.tau);
      try {
        run.trace = md_run(inst, md);
      } catch (const DivergenceError&) {
        run.diverged = true;
      }
    }
  });

  CsvTable traces =
      stamp.table({"n", "d", "tau", "potential", "replicate", "t", "step", "in_sample_risk", "empirical_risk"});
  CsvTable run_table = stamp.table({"n", "d", "tau", "potential", "replicate", "diverged", "truncated", "horizon",
                                    "eta", "initial_risk", "best_step", "best_in_sample_risk"});
  CsvTable quant = stamp.table(
      {"n", "d", "tau", "potential", "t", "mean_risk", "q10_risk", "q90_risk", "included", "diverged_excluded"});
  json groups = json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const GridCell& cell = cells[c];
    for (std::size_t k = 0; k < n_pot; ++k) {
      const std::string& name = cfg.potentials[k];
      std::map<double, std::vector<double>> by_time;
      std::size_t diverged = 0, truncated = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        const Run& run = runs[(c * reps + r) * n_pot + k];
        const RiskTrace& tr = run.trace;
        run_table.add_row({as_i64(cell.n), as_i64(cell.d), cell.tau, name, as_u64(r), run.diverged,
                           !run.diverged && tr.truncated, run.diverged ? kNaN : tr.horizon,
                           run.diverged ? kNaN : tr.resolved_eta, run.initial_risk,
                           as_u64(run.diverged ? 0 : tr.best_step),
                           run.diverged ? kNaN : tr.best_in_sample_risk});
        if (run.diverged) {
          ++diverged;
          continue;
        }
        truncated += tr.truncated ? 1 : 0;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
          traces.add_row({as_i64(cell.n), as_i64(cell.d), cell.tau, name, as_u64(r), tr.times[i],
                          as_u64(tr.iterate_indices[i]), tr.in_sample_risks[i], tr.empirical_risks[i]});
          by_time[tr.times[i]].push_back(tr.in_sample_risks[i]);
        }
      }
      for (const auto& [t, values] : by_time)
        quant.add_row({as_i64(cell.n), as_i64(cell.d), cell.tau, name, t, mean(values), quantile(values, 0.1),
                       quantile(values, 0.9), as_u64(values.size()), as_u64(diverged)});
      groups.push_back({{"n", cell.n},
                        {"d", cell.d},
                        {"tau", cell.tau},
                        {"potential", name},
                        {"diverged", diverged},
                        {"truncated", truncated}});
    }
  }
  ExperimentResult result;
  result.experiment = cfg.experiment;
  json j = stamp.summary(cfg);
  j["epsilon"] = epsilon;
  j["eta_scale"] = cfg.eta_scale;
  j["max_iters"] = cfg.max_iters;
  j["dt"] = cfg.dt;
  j["integrator"] = cfg.integrator;
  j["groups"] = groups;
  result.summary_json = j.dump(2);
  result.tables.emplace_back("traces.csv", std::move(traces));
  result.tables.emplace_back("runs.csv", std::move(run_table));
  result.tables.emplace_back("trace_quantiles.csv", std::move(quant));
  return result;
}

// ---------------------------------------------------------------- comparison

ExperimentResult run_comparison(const ExperimentConfig& cfg, const RunOptions& options) {
  if (cfg.experiment != Experiment::Comparison) throw InvalidArgument("run_comparison: wrong experiment");
  validate(cfg);
  const Stamp stamp(cfg, options);
  const std::vector<GridCell> grid = ndtau_grid(cfg);
  const std::size_t reps = cfg.replicates;
  const double log_term = 4.0 * std::log(1.0 / cfg.delta);
  const RngStream root(cfg.base_seed);
  const WidthOptions wopts = width_options(cfg, options.threads);

  struct Cell {
    GridCell g;
    std::string potential;
    std::optional<DesignMatrix> x;
    std::optional<Potential> psi;
    std::optional<ConvexBody> body;
    std::vector<Vector> probes;
    std::vector<std::string> probe_kinds;
    double epsilon = 0.0;
    double epsilon_radius = kNaN;  // r-hat at the zero center, when epsilon is derived
    std::vector<double> bounds;    // NaN when unavailable
    std::vector<double> bound_radii;
  };
  std::vector<Cell> cells;
  for (const GridCell& g : grid)
    for (const std::string& name : cfg.potentials) {
      Cell& cell = cells.emplace_back();
      cell.g = g;
      cell.potential = name;
    }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    Cell& cell = cells[c];
    const Index d = cell.g.d;
    const double tau = cell.g.tau;
    const RngStream stream = root.fork(c);
    cell.x = sample_gaussian_design(cell.g.n, d, stream.fork(kDesign));
    cell.body = make_named_body(cfg.body, d, cfg.body_p);
    auto [psi, body] = make_named_potential(cell.potential, *cell.body, d, tau);
    cell.psi = psi;
    cell.body = body;
    if (cfg.probes == "zero") {
      cell.probes.push_back(Vector::Zero(d));
      cell.probe_kinds.push_back("zero");
    } else if (cfg.probes == "e1") {
      cell.probes.push_back(basis(d, 0, tau));
      cell.probe_kinds.push_back("vertex");
    } else {
      for (Index i = 0; i < d; ++i)
        for (double sign : {1.0, -1.0}) {
          // Scaled onto the boundary of tau K along the axis.
          const Vector e = basis(d, i, sign);
          cell.probes.push_back((tau / minkowski(*cell.body, e)) * e);
          cell.probe_kinds.push_back("vertex");
        }
      RngStream probe_rng = stream.fork(kProbes);
      for (std::size_t k = 0; k < cfg.random_probes; ++k) {
        cell.probes.push_back(tau * sample_boundary(*cell.body, probe_rng));
        cell.probe_kinds.push_back("boundary");
      }
    }
    // Radii are taken at the inflated scaling 3 c_a tau that contains every iterate.
    const double wide = 3.0 * cell.psi->constants().c_a * tau;
    auto radius = [&](const Vector& center, RngStream rng) -> std::optional<double> {
      try {
        return critical_radius(*cell.x, *cell.body, wide, center, cfg.width_tol, cfg.width_samples, rng, wopts)
            .r_star;
      } catch (const IndeterminateError&) {
        return std::nullopt;
      }
    };
    const double n = static_cast<double>(cell.g.n);
    if (cfg.epsilon) {
      cell.epsilon = *cfg.epsilon;
    } else {
      const auto r = radius(Vector::Zero(d), stream.fork(kEpsilonWidth));
      if (!r) throw IndeterminateError("run_comparison: critical radius for epsilon could not be resolved", 0, 0);
      cell.epsilon_radius = *r;
      cell.epsilon = (2.0 * *r * *r + log_term) / n;
    }
    cell.bounds.assign(cell.probes.size(), kNaN);
    cell.bound_radii.assign(cell.probes.size(), kNaN);
    if (cfg.compute_bound) {
      // Same noise draws for every probe.
      for (std::size_t j = 0; j < cell.probes.size(); ++j) {
        const auto r = radius(cell.probes[j], stream.fork(kBoundWidth));
        if (!r) continue;
        cell.bound_radii[j] = *r;
        cell.bounds[j] = 2.0 * *r * *r / n + log_term / n + cell.epsilon;
      }
    }
  }

  struct ProbeOutcome {
    double esmd_risk = kNaN;      // exact argmin over all steps
    double oracle_risk = kNaN;    // argmin over recorded steps
    double offset_gap = kNaN;     // <= 0 when the offset condition holds
    double lse_risk = kNaN;
    std::uint64_t horizon = 0;
    double eta = kNaN;
    bool diverged = false;
    bool lse_partial = false;
  };
  std::vector<std::size_t> first_unit(cells.size() + 1, 0);
  for (std::size_t c = 0; c < cells.size(); ++c) first_unit[c + 1] = first_unit[c] + cells[c].probes.size() * reps;
  std::vector<ProbeOutcome> outcomes(first_unit.back());
  const LseOptions lse = lse_options(cfg);
  parallel_for(cells.size() * reps, options.threads, [&](std::size_t u) {
    const std::size_t c = u / reps, rep = u % reps;
    const Cell& cell = cells[c];
    const Vector xi = draw_noise(root.fork(c).fork(kNoise).fork(rep), cell.g.n, cfg.noise_sd);
    for (std::size_t j = 0; j < cell.probes.size(); ++j) {
      const Vector& truth = cell.probes[j];
      const RegressionInstance inst = make_instance(*cell.x, cell.x->matrix() * truth + xi, truth);
      ProbeOutcome& o = outcomes[first_unit[c] + rep * cell.probes.size() + j];
      try {
        const RiskTrace tr = md_run(inst, md_config_for(*cell.psi, cfg, cell.g.tau, cell.epsilon));
        o.esmd_risk = tr.best_in_sample_risk;
        o.oracle_risk = tr.in_sample_risks[oracle_stop(tr)];
        o.offset_gap = offset_condition_gap(inst, tr.best_iterate, truth, cell.epsilon);
        o.horizon = tr.horizon_T;
        o.eta = tr.resolved_eta;
      } catch (const DivergenceError&) {
        o.diverged = true;
      }
      try {
        o.lse_risk = lse_risk(inst, solve_lse(inst, *cell.body, cell.g.tau, lse));
      } catch (const LsePartialResult& e) {
        o.lse_risk = lse_risk(inst, e.partial());
        o.lse_partial = true;
      }
    }
  });

  CsvTable probe_table = stamp.table({"n", "d", "tau", "potential", "seed", "probe", "probe_kind", "esmd_risk",
                                      "esmd_recorded_risk", "lse_risk", "offset_gap", "epsilon", "horizon", "eta",
                                      "bound", "bound_available", "diverged", "lse_partial"});
  CsvTable trials = stamp.table({"n", "d", "tau", "potential", "seed", "sup_esmd_risk", "sup_lse_risk", "ratio",
                                 "ratio_limit", "ratio_within_limit", "offset_satisfied", "bound_satisfied"});
  json cells_json = json::array();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    const double limit = 60.0 * cell.psi->constants().c_a;
    std::size_t within = 0, offset_ok = 0, bound_ok = 0, bound_trials = 0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      double sup_esmd = 0.0, sup_lse = 0.0;
      bool offset_all = true, bound_all = true, bound_any = false;
      for (std::size_t j = 0; j < cell.probes.size(); ++j) {
        const ProbeOutcome& o = outcomes[first_unit[c] + rep * cell.probes.size() + j];
        const bool bounded = std::isfinite(cell.bounds[j]);
        probe_table.add_row({as_i64(cell.g.n), as_i64(cell.g.d), cell.g.tau, cell.potential, as_u64(rep),
                             as_u64(j), cell.probe_kinds[j], o.esmd_risk, o.oracle_risk, o.lse_risk, o.offset_gap,
                             cell.epsilon, o.horizon, o.eta, cell.bounds[j], bounded, o.diverged, o.lse_partial});
        // A diverged run poisons the supremum.
        sup_esmd = o.diverged ? kNaN : std::max(sup_esmd, o.esmd_risk);
        sup_lse = std::max(sup_lse, o.lse_risk);
        offset_all = offset_all && !o.diverged && o.offset_gap <= 0.0;
        if (bounded) {
          bound_any = true;
          bound_all = bound_all && !o.diverged && o.oracle_risk <= cell.bounds[j];
        }
      }
      const double ratio = sup_lse > 0.0 ? sup_esmd / sup_lse : kNaN;
      const bool ok = std::isfinite(ratio) && ratio <= limit;
      within += ok ? 1 : 0;
      offset_ok += offset_all ? 1 : 0;
      if (bound_any) {
        ++bound_trials;
        bound_ok += bound_all ? 1 : 0;
      }
      trials.add_row({as_i64(cell.g.n), as_i64(cell.g.d), cell.g.tau, cell.potential, as_u64(rep), sup_esmd,
                      sup_lse, ratio, limit, ok, offset_all, bound_any ? CsvCell(bound_all) : CsvCell(std::string())});
    }
    cells_json.push_back({{"n", cell.g.n},
                          {"d", cell.g.d},
                          {"tau", cell.g.tau},
                          {"potential", cell.potential},
                          {"c_a", cell.psi->constants().c_a},
                          {"epsilon", cell.epsilon},
                          {"epsilon_radius", json_number(cell.epsilon_radius)},
                          {"probes", cell.probes.size()},
                          {"ratio_limit", limit},
                          {"trials_within_ratio_limit", within},
                          {"trials_offset_satisfied", offset_ok},
                          {"trials_with_bound", bound_trials},
                          {"trials_bound_satisfied", bound_ok}});
  }
  ExperimentResult result;
  result.experiment = cfg.experiment;
  json j = stamp.summary(cfg);
  j["delta"] = cfg.delta;
  j["probes"] = cfg.probes;
  j["cells"] = cells_json;
  result.summary_json = j.dump(2);
  result.tables.emplace_back("probe_risks.csv", std::move(probe_table));
  result.tables.emplace_back("trials.csv", std::move(trials));
  return result;
}

// ---------------------------------------------------------------- width sweep

ExperimentResult run_width_sweep(const ExperimentConfig& cfg, const RunOptions& options) {
  if (cfg.experiment != Experiment::WidthSweep) throw InvalidArgument("run_width_sweep: wrong experiment");
  validate(cfg);
  if (cfg.r_values.empty()) throw ConfigError("width_sweep: r must list at least one radius");
  for (double r : cfg.r_values)
    if (!(r >= 0.0)) throw ConfigError("width_sweep: radii must be non-negative");
  const Stamp stamp(cfg, options);
  const std::vector<GridCell> cells = ndtau_grid(cfg);
  const std::size_t reps = cfg.replicates;
  const RngStream root(cfg.base_seed);

  struct Slot {
    std::vector<WidthEstimate> widths;
    std::optional<CriticalRadius> radius;
    int rank = 0;
  };
  std::vector<Slot> slots(cells.size() * reps);
  parallel_for(slots.size(), options.threads, [&](std::size_t u) {
    const GridCell& cell = cells[u / reps];
    const RngStream stream = root.fork(u / reps).fork(u % reps);
    const DesignMatrix x = sample_gaussian_design(cell.n, cell.d, stream.fork(kDesign));
    const ConvexBody body = make_named_body(cfg.body, cell.d, cfg.body_p);
    const Vector truth = cfg.probes == "e1" ? basis(cell.d, 0, cell.tau) : Vector::Zero(cell.d);
    const WidthOptions wopts = width_options(cfg, 1);
    LocalizedWidthSampler sampler(x, body, cell.tau, truth, stream.fork(kBoundWidth), wopts);
    Slot& s = slots[u];
    for (double r : cfg.r_values) s.widths.push_back(sampler.estimate(r, cfg.width_samples));
    try {
      s.radius = critical_radius(x, body, cell.tau, truth, cfg.width_tol, cfg.width_samples,
                                 stream.fork(kBoundWidth), wopts);
    } catch (const IndeterminateError&) {
    }
    s.rank = x.rank();
  });

  CsvTable widths = stamp.table({"n", "d", "tau", "replicate", "r", "width_mean", "width_stderr", "half_r_squared",
                                 "solver_gap_max", "flagged"});
  CsvTable radii = stamp.table({"n", "d", "tau", "replicate", "r_star", "lo", "hi", "available", "rank",
                                "full_width", "full_width_stderr"});
  for (std::size_t u = 0; u < slots.size(); ++u) {
    const GridCell& cell = cells[u / reps];
    const Slot& s = slots[u];
    for (std::size_t k = 0; k < cfg.r_values.size(); ++k) {
      const double r = cfg.r_values[k];
      widths.add_row({as_i64(cell.n), as_i64(cell.d), cell.tau, as_u64(u % reps), r, s.widths[k].mean,
                      s.widths[k].std_error, 0.5 * r * r, s.widths[k].per_sample_solver_gap_max,
                      as_u64(s.widths[k].flagged)});
    }
    const bool ok = s.radius.has_value();
    radii.add_row({as_i64(cell.n), as_i64(cell.d), cell.tau, as_u64(u % reps), ok ? s.radius->r_star : kNaN,
                   ok ? s.radius->lo : kNaN, ok ? s.radius->hi : kNaN, ok, std::int64_t{s.rank},
                   ok ? s.radius->full_width.mean : kNaN, ok ? s.radius->full_width.std_error : kNaN});
  }
  ExperimentResult result;
  result.experiment = cfg.experiment;
  json j = stamp.summary(cfg);
  j["body"] = cfg.body;
  j["width_samples"] = cfg.width_samples;
  result.summary_json = j.dump(2);
  result.tables.emplace_back("widths.csv", std::move(widths));
  result.tables.emplace_back("critical_radii.csv", std::move(radii));
  return result;
}

// ---------------------------------------------------------------- assumption suite

ExperimentResult run_check_potentials(const ExperimentConfig& cfg, const RunOptions& options) {
  if (cfg.experiment != Experiment::CheckPotentials) throw InvalidArgument("run_check_potentials: wrong experiment");
  validate(cfg);
  const Stamp stamp(cfg, options);
  struct Cell {
    std::string potential;
    Index d;
    double tau;
  };
  std::vector<Cell> cells;
  for (const std::string& name : cfg.potentials)
    for (Index d : cfg.d_values)
      for (double tau : cfg.tau_values) cells.push_back({name, d, tau});
  struct Slot {
    AssumptionReport report;
    PotentialConstants constants;
    std::string body;
  };
  std::vector<Slot> slots(cells.size());
  const RngStream root(cfg.base_seed);
  parallel_for(cells.size(), options.threads, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const ConvexBody body = make_named_body(cfg.body, cell.d, cfg.body_p);
    const auto [psi, ref] = make_named_potential(cell.potential, body, cell.d, cell.tau);
    slots[c].report = check_assumption(psi, ref, cell.tau, cfg.check_samples, root.fork(c));
    slots[c].constants = psi.constants();
    slots[c].body = ref.kind() == ConvexBody::Kind::PolytopeH ? "cube" : cfg.body;
  });
  CsvTable table = stamp.table({"potential", "body", "d", "tau", "passed", "c_l", "c_u", "c_a", "grad_at_zero_norm",
                                "sqrt_convexity_violations", "strong_convexity_violations",
                                "lower_bound_violations", "upper_bound_violations", "worst_lower_ratio",
                                "worst_upper_ratio", "samples"});
  std::size_t failed = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const AssumptionReport& r = slots[c].report;
    const PotentialConstants& k = slots[c].constants;
    table.add_row({cells[c].potential, slots[c].body, as_i64(cells[c].d), cells[c].tau, r.passed, k.c_l, k.c_u, k.c_a,
                   r.grad_at_zero_norm, as_u64(r.sqrt_convexity_violations),
                   as_u64(r.strong_convexity_violations), as_u64(r.lower_bound_violations),
                   as_u64(r.upper_bound_violations), r.worst_lower_ratio, r.worst_upper_ratio,
                   as_u64(r.samples_used)});
    failed += r.passed ? 0 : 1;
  }
  ExperimentResult result;
  result.experiment = cfg.experiment;
  result.exit_code = failed == 0 ? 0 : 1;
  json j = stamp.summary(cfg);
  j["cells"] = cells.size();
  j["failed"] = failed;
  result.summary_json = j.dump(2);
  result.tables.emplace_back("assumption_reports.csv", std::move(table));
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  switch (cfg.experiment) {
    case Experiment::MinimaxRate: return run_minimax_experiment(cfg, options);
    case Experiment::PathStudy: return run_path_experiment(cfg, options);
    case Experiment::Comparison: return run_comparison(cfg, options);
    case Experiment::WidthSweep: return run_width_sweep(cfg, options);
    case Experiment::CheckPotentials: return run_check_potentials(cfg, options);
  }
  throw InvalidArgument("run_experiment: unknown experiment");
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&dir](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw Error("failed writing " + (dir / name).string());
  };
  for (const auto& [name, table] : result.tables) write(name, table.str());
  write("summary.json", result.summary_json + "\n");
}

}  // namespace esmd
