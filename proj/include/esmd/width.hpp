#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "esmd/convex_body.hpp"
#include "esmd/model.hpp"
#include "esmd/rng.hpp"

namespace esmd {

struct WidthEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample sd / sqrt(n_samples)
  std::size_t n_samples = 0;
  double per_sample_solver_gap_max = 0.0;
  std::size_t flagged = 0;  // samples whose inner solve missed inner_tol
};

struct WidthOptions {
  double inner_tol = 1e-4;  // per-sample duality gap on the localized supremum
  unsigned threads = 1;
  // Half-width of the critical-radius decision band in standard errors.
  double band_sigmas = 4.0;
  std::size_t max_expansion = 16;  // sample count may grow to this multiple
};

// Mean over samples i of sup_{a in tau K} <xi_i, X (a - center)>, with xi_i
// drawn from rng.fork(i).
WidthEstimate gaussian_width_mc(const DesignMatrix& x, const ConvexBody& body, double tau, std::size_t n_samples,
                                RngStream rng, const std::optional<Vector>& center = std::nullopt,
                                unsigned threads = 1);

// Localized width of (X tau K - X a*) intersected with r B_2. Keeps the noise
// draws and per-sample warm starts alive across radii, so every call on the
// same sampler uses common random numbers.
class LocalizedWidthSampler {
 public:
  LocalizedWidthSampler(const DesignMatrix& x, const ConvexBody& body, double tau, const Vector& truth,
                        RngStream rng, WidthOptions options = {});
  ~LocalizedWidthSampler();
  LocalizedWidthSampler(LocalizedWidthSampler&&) noexcept;
  LocalizedWidthSampler& operator=(LocalizedWidthSampler&&) noexcept;

  WidthEstimate estimate(double r, std::size_t n_samples);
  // Per-sample values of the last estimate call.
  const std::vector<double>& last_values() const;
  const WidthOptions& options() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

WidthEstimate localized_width_mc(const DesignMatrix& x, const ConvexBody& body, double tau, const Vector& truth,
                                 double r, std::size_t n_samples, RngStream rng, double inner_tol = 1e-4);

struct CriticalRadius {
  double r_star = 0.0;  // upper end of the final bracket
  double lo = 0.0;
  double hi = 0.0;
  WidthEstimate width_at_r;
  WidthEstimate full_width;  // unlocalized width of the recentered image
  double tolerance = 0.0;
  bool degenerate = false;  // the image X tau K is a single point
  std::size_t n_samples_used = 0;
};

// Smallest r with localized width <= r^2 / 2, by bisection with a Monte Carlo
// decision band; throws IndeterminateError when the band never resolves.
CriticalRadius critical_radius(const DesignMatrix& x, const ConvexBody& body, double tau, const Vector& truth,
                               double tol, std::size_t n_samples, RngStream rng, const WidthOptions& options = {});

struct ScalingReport {
  double worst_ratio = 0.0;  // max over centers of r*^2(tau side) / (tau r*^2(K side))
  std::vector<double> ratios;
};

// Compares r*^2(tau a, tau K) with tau r*^2(a, K) for centers a sampled in K,
// both sides on the same noise draws.
ScalingReport scaling_check(const DesignMatrix& x, const ConvexBody& body, double tau, std::size_t centers,
                            RngStream rng, std::size_t n_samples = 200, double rel_tol = 0.01,
                            WidthOptions options = {});

}  // namespace esmd
