#include <doctest.h>

#include <cmath>

#include "esmd/width.hpp"
#include "oracles.hpp"

using namespace esmd;

namespace {

// E |xi|_2 for xi ~ N(0, I_n).
double expected_norm(double n) { return std::sqrt(2.0) * std::exp(std::lgamma((n + 1.0) / 2.0) - std::lgamma(n / 2.0)); }

DesignMatrix column_normalized(Index n, Index d, RngStream rng) {
  Matrix x = sample_gaussian_design(n, d, rng).matrix();
  for (Index j = 0; j < d; ++j) x.col(j) *= std::sqrt(static_cast<double>(n)) / x.col(j).norm();
  return DesignMatrix(x);
}

}  // namespace

TEST_CASE("width of a point image vanishes") {
  const DesignMatrix x(Matrix::Identity(5, 5));
  const WidthEstimate w = gaussian_width_mc(x, ConvexBody::lp_ball(5, 1.0), 1e-14, 100, RngStream(41));
  CHECK(std::abs(w.mean) <= 1e-12);
}

TEST_CASE("width of the Euclidean ball is the expected norm") {
  const Index n = 20;
  const DesignMatrix x(Matrix::Identity(n, n));
  const WidthEstimate w = gaussian_width_mc(x, ConvexBody::lp_ball(n, 2.0), 1.0, 10000, RngStream(42));
  CHECK(std::abs(w.mean - expected_norm(20.0)) <= 4.0 * w.std_error);
  CHECK(w.n_samples == 10000);
}

TEST_CASE("cross-polytope width obeys the sub-Gaussian maximum bound") {
  const DesignMatrix x = column_normalized(50, 200, RngStream(43));
  const WidthEstimate w = gaussian_width_mc(x, ConvexBody::lp_ball(200, 1.0), 1.0, 2000, RngStream(44));
  CHECK(w.mean <= 2.0 * std::sqrt(50.0 * std::log(200.0)) + 4.0 * w.std_error);
}

TEST_CASE("width scales linearly with the radius on common draws") {
  const DesignMatrix x = sample_gaussian_design(15, 25, RngStream(45));
  for (double p : {1.0, 1.5, 2.0}) {
    const ConvexBody body = ConvexBody::lp_ball(25, p);
    const WidthEstimate one = gaussian_width_mc(x, body, 1.0, 200, RngStream(46));
    const WidthEstimate many = gaussian_width_mc(x, body, 3.5, 200, RngStream(46));
    const WidthEstimate scaled = gaussian_width_mc(x, scale(body, 3.5), 1.0, 200, RngStream(46));
    CHECK(many.mean == doctest::Approx(3.5 * one.mean).epsilon(1e-12));
    CHECK(scaled.mean == doctest::Approx(3.5 * one.mean).epsilon(1e-12));
  }
}

TEST_CASE("standard error shrinks with the square root of the sample count") {
  const DesignMatrix x = sample_gaussian_design(10, 10, RngStream(47));
  const ConvexBody body = ConvexBody::lp_ball(10, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const WidthEstimate a = gaussian_width_mc(x, body, 1.0, 2000, RngStream(48, trial));
    const WidthEstimate b = gaussian_width_mc(x, body, 1.0, 4000, RngStream(49, trial));
    const double ratio = a.std_error / b.std_error / std::sqrt(2.0);
    CHECK(ratio >= 1.0 / 1.2);
    CHECK(ratio <= 1.2);
  }
}

TEST_CASE("a huge radius leaves the localization inactive") {
  RngStream rng(50);
  const DesignMatrix x = sample_gaussian_design(12, 20, rng.fork(1));
  const ConvexBody body = ConvexBody::lp_ball(20, 1.0);
  Vector center = Vector::Zero(20);
  center(2) = 0.4;
  center(5) = -0.3;
  const WidthEstimate full = gaussian_width_mc(x, body, 1.0, 200, rng.fork(2), center);
  const WidthEstimate local = localized_width_mc(x, body, 1.0, center, 1e6, 200, rng.fork(2));
  CHECK(std::abs(full.mean - local.mean) <= 4.0 * full.std_error);
  CHECK(std::abs(full.mean - local.mean) <= 1e-9);
}

TEST_CASE("a vanishing radius gives a vanishing width") {
  const DesignMatrix x = sample_gaussian_design(12, 20, RngStream(51));
  const ConvexBody body = ConvexBody::lp_ball(20, 1.5);
  const WidthEstimate w = localized_width_mc(x, body, 1.0, Vector::Zero(20), 1e-8, 100, RngStream(52));
  CHECK(std::abs(w.mean) <= 1e-6);
}

TEST_CASE("two-dimensional localized width matches a grid search") {
  RngStream rng(53);
  const Matrix xm = sample_gaussian_design(2, 2, rng.fork(1)).matrix();
  const DesignMatrix x(xm);
  const ConvexBody body = ConvexBody::lp_ball(2, 1.0);
  const Vector center{{0.3, -0.2}};
  const double r = 0.5;
  const double inner_tol = 1e-5;
  const std::size_t samples = 30;
  LocalizedWidthSampler sampler(x, body, 1.0, center, rng.fork(2), WidthOptions{inner_tol});
  const WidthEstimate est = sampler.estimate(r, samples);
  // Same draws as the sampler: sample i uses fork(i) of its stream.
  const int grid = 1000;
  std::vector<Vector> feasible;
  for (int i = 0; i <= grid; ++i) {
    for (int j = 0; j <= grid; ++j) {
      const Vector a{{-1.0 + 2.0 * i / grid, -1.0 + 2.0 * j / grid}};
      if (a.lpNorm<1>() > 1.0) continue;
      const Vector theta = xm * (a - center);
      if (theta.norm() <= r) feasible.push_back(theta);
    }
  }
  REQUIRE(feasible.size() > 1000);
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    RngStream draw = rng.fork(2).fork(s);
    const Vector xi{{draw.gaussian(), draw.gaussian()}};
    double best = 0.0;
    for (const Vector& theta : feasible) best = std::max(best, xi.dot(theta));
    total += best;
    CHECK(sampler.last_values()[s] >= best - 10.0 * inner_tol);
  }
  const double grid_mean = total / static_cast<double>(samples);
  CHECK(std::abs(est.mean - grid_mean) <= std::max(4.0 * est.std_error, 10.0 * inner_tol));
  CHECK(est.per_sample_solver_gap_max <= inner_tol);
}

TEST_CASE("localized widths grow with the radius on common draws") {
  RngStream rng(54);
  const DesignMatrix x = sample_gaussian_design(15, 30, rng.fork(1));
  const ConvexBody body = ConvexBody::lp_ball(30, 1.0);
  Vector center = Vector::Zero(30);
  center(0) = 0.5;
  const double inner_tol = 1e-4;
  LocalizedWidthSampler sampler(x, body, 1.0, center, rng.fork(2), WidthOptions{inner_tol});
  std::vector<double> previous;
  double previous_mean = -1.0;
  for (double r : {0.1, 0.3, 0.6, 1.0, 1.5, 2.5, 4.0}) {
    const WidthEstimate est = sampler.estimate(r, 60);
    CHECK(est.mean >= previous_mean - inner_tol);
    CHECK(est.mean >= -inner_tol);
    const std::vector<double>& values = sampler.last_values();
    for (std::size_t i = 0; i < previous.size(); ++i) CHECK(values[i] >= previous[i] - inner_tol);
    previous = values;
    previous_mean = est.mean;
  }
}

TEST_CASE("worker count does not change the estimate") {
  RngStream rng(55);
  const DesignMatrix x = sample_gaussian_design(10, 20, rng.fork(1));
  const ConvexBody body = ConvexBody::lp_ball(20, 1.0);
  WidthOptions serial;
  WidthOptions threaded;
  threaded.threads = 4;
  LocalizedWidthSampler a(x, body, 1.0, Vector::Zero(20), rng.fork(2), serial);
  LocalizedWidthSampler b(x, body, 1.0, Vector::Zero(20), rng.fork(2), threaded);
  CHECK(a.estimate(0.7, 50).mean == b.estimate(0.7, 50).mean);
  CHECK(a.last_values() == b.last_values());
}

TEST_CASE("center outside the body is rejected") {
  const DesignMatrix x(Matrix::Identity(3, 3));
  CHECK_THROWS_AS(localized_width_mc(x, ConvexBody::lp_ball(3, 1.0), 1.0, Vector::Constant(3, 0.5), 1.0, 30,
                                     RngStream(56)),
                  InvalidArgument);
  CHECK_THROWS_AS(gaussian_width_mc(x, ConvexBody::lp_ball(3, 1.0), 1.0, 10, RngStream(56)), InvalidArgument);
}

TEST_CASE("critical radius of a large Euclidean ball") {
  // Inside tau B_2 the localized set is r B_2, whose width is r E|xi|, so the
  // fixed point is r* = 2 E|xi| while that stays below tau.
  const Index n = 10;
  const DesignMatrix x(Matrix::Identity(n, n));
  const ConvexBody ball = ConvexBody::lp_ball(n, 2.0);
  const double tol = 0.3;
  const CriticalRadius big = critical_radius(x, ball, 10.0, Vector::Zero(n), tol, 400, RngStream(57));
  const double noise = 8.0 * 0.71 / std::sqrt(400.0);  // 4 se of 2 mean|xi|, sd|xi| < 0.71
  CHECK(std::abs(big.r_star - 2.0 * expected_norm(10.0)) <= tol + noise);
  // With tau = 2 the ball binds: r*^2 / 2 = tau E|xi|.
  const CriticalRadius small = critical_radius(x, ball, 2.0, Vector::Zero(n), tol, 400, RngStream(58));
  CHECK(std::abs(small.r_star - std::sqrt(2.0 * 2.0 * expected_norm(10.0))) <= tol + noise);
}

TEST_CASE("critical radius respects its caps and bracket") {
  RngStream rng(59);
  for (int trial = 0; trial < 3; ++trial) {
    const DesignMatrix x = sample_gaussian_design(10, 20, rng.fork(trial));
    const ConvexBody body = ConvexBody::lp_ball(20, 1.0);
    Vector center = Vector::Zero(20);
    center(trial) = 0.5;
    const double tol = 0.5;
    const CriticalRadius cr = critical_radius(x, body, 1.0, center, tol, 100, rng.fork(100 + trial));
    CHECK(cr.r_star * cr.r_star <= 4.0 * x.rank());
    CHECK(cr.r_star * cr.r_star <= 2.0 * cr.full_width.mean + 8.0 * cr.full_width.std_error + 1e-12);
    CHECK(cr.lo <= cr.r_star);
    CHECK(cr.r_star <= cr.hi);
    CHECK(cr.hi - cr.lo <= tol);
    CHECK(!cr.degenerate);
  }
}

TEST_CASE("zero design has a degenerate critical radius") {
  const DesignMatrix x(Matrix::Zero(6, 4));
  const CriticalRadius cr = critical_radius(x, ConvexBody::lp_ball(4, 1.0), 1.0, Vector::Zero(4), 0.1, 50,
                                            RngStream(60));
  CHECK(cr.degenerate);
  CHECK(cr.r_star == 0.0);
}

TEST_CASE("an unreachable tolerance is reported as indeterminate") {
  const DesignMatrix x = sample_gaussian_design(8, 8, RngStream(61));
  WidthOptions opts;
  opts.max_expansion = 2;
  try {
    critical_radius(x, ConvexBody::lp_ball(8, 1.0), 1.0, Vector::Zero(8), 1e-9, 30, RngStream(62), opts);
    FAIL("expected an indeterminate bracket");
  } catch (const IndeterminateError& e) {
    CHECK(e.lo() <= e.hi());
  }
}

TEST_CASE("scaling check") {
  RngStream rng(63);
  const DesignMatrix x = sample_gaussian_design(10, 12, rng.fork(1));
  const ConvexBody l1 = ConvexBody::lp_ball(12, 1.0);
  const ScalingReport same = scaling_check(x, l1, 1.0, 2, rng.fork(2), 100);
  for (double ratio : same.ratios) CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
  const ScalingReport wide = scaling_check(x, l1, 4.0, 5, rng.fork(3), 100);
  CHECK(wide.ratios.size() == 5);
  CHECK(wide.worst_ratio <= 1.1);
  const DesignMatrix id(Matrix::Identity(10, 10));
  const ScalingReport ball = scaling_check(id, ConvexBody::lp_ball(10, 2.0), 2.0, 3, rng.fork(4), 100);
  CHECK(ball.worst_ratio <= 1.1);
}

TEST_CASE("a critical radius pinned at the width cap never exceeds it") {
  // A tiny Euclidean body makes the cap bind; r* is clamped down rather than
  // landing one rounding step above it.
  const Index n = 20;
  const DesignMatrix x(Matrix::Identity(n, n));
  for (int trial = 0; trial < 4; ++trial) {
    const CriticalRadius cr =
        critical_radius(x, ConvexBody::lp_ball(n, 2.0), 0.2, Vector::Zero(n), 0.05, 200, RngStream(80 + trial));
    CHECK(cr.r_star * cr.r_star <= 2.0 * cr.full_width.mean + 8.0 * cr.full_width.std_error);
    CHECK(cr.r_star * cr.r_star <= 4.0 * x.rank());
    CHECK(cr.r_star > 0.0);
  }
}
