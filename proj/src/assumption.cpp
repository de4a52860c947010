#include "esmd/assumption.hpp"

#include <algorithm>
#include <cmath>

namespace esmd {

Vector sample_direction(Index d, RngStream& rng) {
  Vector v = Vector::Zero(d);
  const std::uint64_t pattern = rng.below(4);
  if (pattern == 0) {
    for (Index i = 0; i < d; ++i) v(i) = rng.gaussian();
  } else if (pattern == 1) {
    const auto k = static_cast<Index>(1 + rng.below(static_cast<std::uint64_t>(std::min<Index>(d, 3))));
    for (Index j = 0; j < k; ++j) v(static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)))) = rng.gaussian();
  } else if (pattern == 2) {
    v(static_cast<Index>(rng.below(static_cast<std::uint64_t>(d)))) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  } else {
    for (Index i = 0; i < d; ++i) v(i) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  const double nrm = v.norm();
  if (nrm == 0.0) {
    v(0) = 1.0;
    return v;
  }
  return v / nrm;
}

namespace {

// Point of tau K: boundary, LMO vertex, or scaled interior point.
Vector sample_in_body(const ConvexBody& body, double tau, RngStream& rng) {
  const Index d = body.dim();
  const std::uint64_t kind = rng.below(3);
  if (kind == 0) {
    const Vector v = sample_direction(d, rng);
    return tau * lmo(body, v).coords;
  }
  Vector dir = sample_direction(d, rng);
  const double g = minkowski(body, dir);
  Vector boundary = tau * dir / g;
  if (kind == 1) return boundary;
  return std::pow(rng.uniform(), 1.0 / static_cast<double>(d)) * boundary;
}

// Point of R^d at a log-uniform scale around tau.
Vector sample_in_cube(Index d, double tau, RngStream& rng) {
  const double scale = tau * std::pow(10.0, rng.uniform(-3.0, 3.0));
  return scale * sample_direction(d, rng) * std::sqrt(static_cast<double>(d)) * rng.uniform();
}

double slack(double magnitude) { return 1e-8 * (1.0 + std::abs(magnitude)); }

}  // namespace

AssumptionReport check_assumption(const Potential& psi, const ConvexBody& body, double tau,
                                  std::size_t n_samples, RngStream rng) {
  if (psi.dim() != body.dim()) throw InvalidArgument("check_assumption: dimension mismatch");
  if (n_samples < 100) throw InvalidArgument("check_assumption: need at least 100 samples");
  if (!(tau > 0.0)) throw InvalidArgument("check_assumption: tau must be positive");
  const Index d = psi.dim();
  const PotentialConstants& k = psi.constants();
  AssumptionReport rep;
  rep.samples_used = n_samples;
  rep.grad_at_zero_norm = psi.gradient(Vector::Zero(d)).norm();

  auto root = [&](const Vector& a) { return std::sqrt(std::max(0.0, psi.value(a))); };

  for (std::size_t s = 0; s < n_samples; ++s) {
    // Pairs mix nearby and far-apart points, both in R^d and in tau K.
    Vector a = rng.uniform() < 0.5 ? sample_in_cube(d, tau, rng) : sample_in_body(body, tau, rng);
    Vector b = rng.uniform() < 0.5
                   ? Vector(a + std::pow(10.0, rng.uniform(-4.0, 0.0)) * (1.0 + a.norm()) * sample_direction(d, rng))
                   : (rng.uniform() < 0.5 ? sample_in_cube(d, tau, rng) : sample_in_body(body, tau, rng));
    const double ra = root(a);
    const double rb = root(b);
    const double rm = root(0.5 * (a + b));
    if (rm > 0.5 * (ra + rb) + slack(ra + rb)) ++rep.sqrt_convexity_violations;

    if (psi.caps().discrete_ok) {
      const double div = psi.bregman(a, b);
      const double dist = norm_in(k.rho_norm, a - b);
      const double scale = std::abs(psi.value(a)) + std::abs(psi.value(b));
      if (div < 0.5 * k.rho * dist * dist - slack(scale)) ++rep.strong_convexity_violations;
    }

    const Vector x = sample_in_cube(d, tau, rng);
    const double gauge = minkowski(body, x);
    const double rx = root(x);
    if (gauge > 0.0) rep.worst_lower_ratio = std::max(rep.worst_lower_ratio, gauge / (k.c_l * rx));
    if (gauge > k.c_l * rx + slack(gauge)) ++rep.lower_bound_violations;

    const Vector y = sample_in_body(body, tau, rng);
    const double ry = root(y);
    rep.worst_upper_ratio = std::max(rep.worst_upper_ratio, ry / (k.c_u * tau));
    if (ry > k.c_u * tau + slack(k.c_u * tau)) ++rep.upper_bound_violations;
  }
  rep.passed = rep.grad_at_zero_norm <= 1e-8 && rep.sqrt_convexity_violations == 0 &&
               rep.strong_convexity_violations == 0 && rep.lower_bound_violations == 0 &&
               rep.upper_bound_violations == 0;
  return rep;
}

Potential make_certified_moreau_potential(const ConvexBody& body, double lambda, RngStream rng, std::size_t check_samples) {
  if (!(lambda > 0.0)) throw InvalidArgument("make_certified_moreau_potential: lambda must be positive");
  const double rho = 2.0 / max_squared_norm(body, rng.fork(1));
  AssumptionReport last;
  for (int halving = 0; halving <= 20; ++halving) {
    Potential psi = generic_moreau(body, lambda, rho, 2.0, 2.0);
    last = check_assumption(psi, body, 1.0, check_samples, rng.fork(2 + static_cast<std::uint64_t>(halving)));
    if (last.passed) return psi;
    lambda *= 0.5;
  }
  throw ConstructionError("make_certified_moreau_potential: no admissible lambda after 20 halvings (lower " +
                          std::to_string(last.lower_bound_violations) + ", upper " +
                          std::to_string(last.upper_bound_violations) + ")");
}

InclusionReport bregman_ball_inclusion(const Potential& psi, const ConvexBody& body, double tau,
                                       const Vector& truth, std::size_t n_points, RngStream rng) {
  const Index d = psi.dim();
  require_length(truth, d, "bregman_ball_inclusion");
  const double radius = 2.0 * psi.bregman(truth, Vector::Zero(d));
  const double psi_truth = psi.value(truth);  // constant along every ray
  const double limit = 3.0 * psi.constants().c_a * tau;
  InclusionReport rep;
  auto record = [&](const Vector& a) {
    const double ratio = minkowski(body, a) / limit;
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (ratio > 1.0 + 1e-8) ++rep.violations;
    ++rep.points;
  };
  while (rep.points < n_points) {
    const Vector u = sample_direction(d, rng);
    auto inside = [&](double s) {
      const Vector base = truth + s * u;
      return psi_truth - psi.value(base) - psi.gradient(base).dot(truth - base) <= radius;
    };
    // Largest step along u that stays in the ball.
    double lo = 0.0;
    double hi = tau;
    int guard = 0;
    while (inside(hi) && guard++ < 200) {
      lo = hi;
      hi *= 2.0;
    }
    for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (inside(mid)) lo = mid; else hi = mid;
    }
    record(truth + lo * u);
    if (rep.points < n_points) record(truth + rng.uniform() * lo * u);
  }
  return rep;
}

}  // namespace esmd
