#pragma once

#include "esmd/convex_body.hpp"
#include "esmd/potential.hpp"

namespace esmd {

struct AssumptionReport {
  double grad_at_zero_norm = 0.0;
  std::size_t sqrt_convexity_violations = 0;
  std::size_t strong_convexity_violations = 0;
  std::size_t lower_bound_violations = 0;
  std::size_t upper_bound_violations = 0;
  std::size_t samples_used = 0;
  bool passed = false;
  // Worst observed phi_K / (c_l sqrt(psi)) and sqrt(psi) / (c_u tau).
  double worst_lower_ratio = 0.0;
  double worst_upper_ratio = 0.0;
};

// Sampled check of: grad psi(0) = 0, convexity of sqrt(psi), strong
// convexity with the certified modulus (discrete-capable kinds), and the
// sandwich phi_K <= c_l sqrt(psi) on R^d, sqrt(psi) <= c_u tau on tau K.
AssumptionReport check_assumption(const Potential& psi, const ConvexBody& body, double tau,
                                  std::size_t n_samples, RngStream rng);

// Moreau-smoothed squared gauge plus ridge; lambda is halved until the
// checker passes with c_l = c_u = 2.
Potential make_certified_moreau_potential(const ConvexBody& body, double lambda, RngStream rng,
                                 std::size_t check_samples = 256);

struct InclusionReport {
  std::size_t points = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max phi_K(alpha) / (3 c_a tau)
};

// Points of {alpha : D_psi(truth, alpha) <= 2 D_psi(truth, 0)} sampled along
// random rays from `truth` (the divergence is non-decreasing along each ray).
InclusionReport bregman_ball_inclusion(const Potential& psi, const ConvexBody& body, double tau,
                                       const Vector& truth, std::size_t n_points, RngStream rng);

// Random direction drawn from a mixture of dense, sparse, axis and sign
// patterns; unit Euclidean norm.
Vector sample_direction(Index d, RngStream& rng);

}  // namespace esmd
