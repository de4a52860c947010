#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "esmd/convex_body.hpp"
#include "esmd/model.hpp"
#include "esmd/potential.hpp"

namespace esmd {

struct DiscreteMode {};
// Rk4 is fourth order but explicit; ImplicitEuler is the Bregman proximal
// point step, first order, and never increases the empirical risk, so it
// stays stable where psi flattens and the flow is stiff.
enum class Integrator { Rk4, ImplicitEuler };

struct ContinuousMode {
  double dt = 1e-2;
  Integrator integrator = Integrator::Rk4;
};

struct MdConfig {
  Potential potential;
  double tau = 1.0;
  double epsilon = 1.0;
  std::optional<double> eta{};  // empty: resolved by step_size_bound
  std::variant<DiscreteMode, ContinuousMode> mode = DiscreteMode{};
  std::size_t max_iters = 1000000;
  std::size_t record_every = 1;
  bool record_bregman = false;
  // When set, the gauge of every iterate is tracked up to the best one.
  std::optional<ConvexBody> gauge_body{};
};

struct RiskTrace {
  std::vector<std::size_t> iterate_indices;  // step counts
  std::vector<double> times;                 // step count (discrete) or ODE time
  std::vector<double> empirical_risks;
  std::vector<double> in_sample_risks;  // present iff the truth is known
  std::vector<double> bregman_to_truth;
  Vector final_iterate;
  double horizon = 0.0;         // T as a real (continuous) or step count
  std::uint64_t horizon_T = 0;  // discrete step count, or number of ODE steps taken
  double resolved_eta = 0.0;
  double eta_certified = 0.0;  // step size from the certified divergence bound
  std::optional<std::size_t> oracle_t_star;  // position in the recorded arrays
  bool truncated = false;                    // stopped by max_iters before T
  // Exact argmin of the in-sample risk over every step, not only recorded ones.
  std::size_t best_step = 0;
  double best_in_sample_risk = 0.0;
  Vector best_iterate;
  double max_gauge_to_best = 0.0;
  // Diagnostic horizon from (D_psi(truth, 0) + eta R_n(truth)) instead of c_u^2 tau^2.
  double proof_level_horizon = 0.0;
  double final_dt = 0.0;
};

Vector md_step_discrete(const Potential& psi, const Vector& alpha, const Vector& grad, double eta);
// argmin <grad, a - alpha> + D_psi(a, alpha) / eta by a direct solver that
// never calls inverse_gradient.
Vector proximal_step(const Potential& psi, const Vector& alpha, const Vector& grad, double eta);

RiskTrace md_run(const RegressionInstance& instance, const MdConfig& cfg);
RiskTrace md_run_continuous(const RegressionInstance& instance, const MdConfig& cfg);

std::uint64_t stopping_horizon_discrete(double c_u, double tau, double epsilon, double eta);
double stopping_horizon_continuous(double c_u, double tau, double epsilon);
double step_size_bound(const Potential& psi, double beta, double d_upper);
std::size_t oracle_stop(const RiskTrace& trace);
double offset_condition_gap(const RegressionInstance& instance, const Vector& alpha, const Vector& truth,
                            double epsilon);

// Step size the run would use: exact D_psi(truth, 0) when available and
// positive, otherwise c_u^2 tau^2.
double resolve_step_size(const RegressionInstance& instance, const Potential& psi, double tau,
                         double* certified = nullptr);

}  // namespace esmd
