#include <doctest.h>

#include <cmath>
#include <numbers>

#include "esmd/hard_design.hpp"
#include "esmd/lse.hpp"
#include "oracles.hpp"
#include "zoo.hpp"

using namespace esmd;

namespace {

// Exact minimizer of |X a - y|^2 over a 2-D polygon given by its vertices in
// cyclic order: interior stationary point if feasible, otherwise the best
// clamped minimizer over the edges.
Vector polygon_oracle(const Matrix& x, const Vector& y, const Matrix& verts) {
  auto value = [&](const Vector& a) { return (x * a - y).squaredNorm(); };
  Vector best;
  double best_value = std::numeric_limits<double>::infinity();
  const Vector free = x.colPivHouseholderQr().solve(y);
  bool inside = true;
  const Index m = verts.cols();
  for (Index i = 0; i < m; ++i) {
    const Vector e = verts.col((i + 1) % m) - verts.col(i);
    const Vector w = free - verts.col(i);
    if (e(0) * w(1) - e(1) * w(0) < 0.0) inside = false;
  }
  if (inside) return free;
  for (Index i = 0; i < m; ++i) {
    const Vector v0 = verts.col(i);
    const Vector e = verts.col((i + 1) % m) - v0;
    const Vector xe = x * e;
    const double denom = xe.squaredNorm();
    const double s = denom > 0.0 ? std::clamp(-(x * v0 - y).dot(xe) / denom, 0.0, 1.0) : 0.0;
    const Vector a = v0 + s * e;
    if (value(a) < best_value) {
      best_value = value(a);
      best = a;
    }
  }
  return best;
}

// Minimizer over the unit disc: interior solution, or a dense angular grid
// refined by golden-section search on the circle.
Vector disc_oracle(const Matrix& x, const Vector& y) {
  const Vector free = x.colPivHouseholderQr().solve(y);
  if (free.norm() <= 1.0) return free;
  auto at = [](double t) { return Vector{{std::cos(t), std::sin(t)}}; };
  auto value = [&](double t) { return (x * at(t) - y).squaredNorm(); };
  const int grid = 200000;
  double best_t = 0.0;
  double best_v = value(0.0);
  for (int i = 1; i < grid; ++i) {
    const double t = 2.0 * std::numbers::pi * i / grid;
    if (value(t) < best_v) {
      best_v = value(t);
      best_t = t;
    }
  }
  double lo = best_t - 2.0 * std::numbers::pi / grid;
  double hi = best_t + 2.0 * std::numbers::pi / grid;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 100; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (value(a) < value(b)) hi = b; else lo = a;
  }
  return at(0.5 * (lo + hi));
}

Matrix triangle() {
  Matrix v(2, 3);
  v << 1.0, -0.5, -0.4,
       0.1, 0.9, -0.8;
  return v;
}

Matrix diamond() {
  Matrix v(2, 4);
  v << 1.0, 0.0, -1.0, 0.0,
       0.0, 1.0, 0.0, -1.0;
  return v;
}

RegressionInstance random_2d(RngStream rng, Index n) {
  const DesignMatrix x = sample_gaussian_design(n, 2, rng.fork(1));
  Vector truth = oracle::gaussian_vector(2, rng, 0.5);
  return sample_instance(x, truth, rng.fork(2), 1.5);
}

}  // namespace

TEST_CASE("radial projection example") {
  const RegressionInstance inst = make_instance(DesignMatrix(Matrix::Identity(2, 2)), Vector{{2.0, 0.0}});
  const LseSolution sol = solve_lse(inst, ConvexBody::lp_ball(2, 2.0), 1.0);
  CHECK((sol.predictions - Vector{{1.0, 0.0}}).norm() <= 1e-6);
  CHECK(sol.fw_gap <= sol.tolerance);
}

TEST_CASE("interior optimum reproduces the response") {
  const Vector y{{0.2, -0.1, 0.3}};
  const RegressionInstance inst = make_instance(DesignMatrix(Matrix::Identity(3, 3)), y);
  for (double p : {1.0, 1.5, 2.0}) {
    const LseSolution sol = solve_lse(inst, ConvexBody::lp_ball(3, p), 1.0);
    CHECK((sol.alpha - y).norm() <= 1e-6);
    CHECK(sol.objective <= 1e-8);
  }
  const LseSolution cube = solve_lse(inst, ConvexBody::polytope_h(testing::hypercube_rows(3)), 1.0);
  CHECK((cube.alpha - y).norm() <= 1e-4);
}

TEST_CASE("hypercube solution is coordinate clipping") {
  const Vector y{{0.4, -2.0, 1.7}};
  const RegressionInstance inst = make_instance(DesignMatrix(Matrix::Identity(3, 3)), y);
  const LseSolution sol = solve_lse(inst, ConvexBody::polytope_h(testing::hypercube_rows(3)), 1.0);
  CHECK((sol.alpha - Vector{{0.4, -1.0, 1.0}}).norm() <= 1e-4);
  CHECK(!sol.fw_objectives.empty());
}

TEST_CASE("two-dimensional instances match exact projections") {
  RngStream rng(31);
  const double n = 6.0;
  const Matrix tri = triangle();
  const Matrix dia = diamond();
  for (int trial = 0; trial < 20; ++trial) {
    const RegressionInstance inst = random_2d(rng.fork(trial), static_cast<Index>(n));
    const Matrix& x = inst.design.matrix();
    const ConvexBody disc = ConvexBody::lp_ball(2, 2.0);
    const ConvexBody l1 = ConvexBody::lp_ball(2, 1.0);
    const ConvexBody tri_body = ConvexBody::polytope_v(tri.transpose());
    const std::pair<const ConvexBody*, Vector> cases[] = {
        {&disc, disc_oracle(x, inst.y)},
        {&l1, polygon_oracle(x, inst.y, dia)},
        {&tri_body, polygon_oracle(x, inst.y, tri)},
    };
    for (const auto& [body, want] : cases) {
      const LseSolution sol = solve_lse(inst, *body, 1.0);
      CHECK((sol.predictions - x * want).norm() <= 1e-4 * std::sqrt(n));
      // The certificate bounds the true suboptimality.
      const double optimum = (x * want - inst.y).squaredNorm() / n;
      CHECK(sol.objective - optimum <= sol.fw_gap + 1e-8);
      CHECK(membership(*body, sol.alpha, 1e-6));
    }
  }
}

TEST_CASE("predictions do not depend on the starting point") {
  RngStream rng(32);
  const Index n = 20;
  const Index d = 40;
  const DesignMatrix x = sample_gaussian_design(n, d, rng.fork(1));
  Vector truth = Vector::Zero(d);
  truth(3) = 0.7;
  const RegressionInstance inst = sample_instance(x, truth, rng.fork(2));
  for (double p : {1.0, 1.5}) {
    const ConvexBody body = ConvexBody::lp_ball(d, p);
    // The gap only controls the squared prediction distance, so the runs ask
    // for the matching certified prediction accuracy.
    const double tol = 1e-8 * (1.0 + inst.y.squaredNorm() / n);
    LseOptions a;
    a.start = Vector::Zero(d);
    a.prediction_tol = 5.0 * tol;
    LseOptions b = a;
    Vector s = oracle::gaussian_vector(d, rng);
    b.start = 0.5 * s / norm_in(NormTag::lp(p), s);
    const LseSolution one = solve_lse(inst, body, 1.0, a);
    const LseSolution two = solve_lse(inst, body, 1.0, b);
    CHECK((one.predictions - two.predictions).norm() / std::sqrt(double(n)) <= 10.0 * tol);
  }
}

TEST_CASE("conditional-gradient objective never increases") {
  RngStream rng(33);
  const RegressionInstance inst = random_2d(rng, 8);
  const ConvexBody tri_body = ConvexBody::polytope_v(triangle().transpose());
  LseOptions plain;
  plain.away_steps = false;
  for (const LseOptions& opts : {LseOptions{}, plain}) {
    const LseSolution sol = solve_lse(inst, tri_body, 1.0, opts);
    REQUIRE(!sol.fw_objectives.empty());
    for (std::size_t i = 1; i < sol.fw_objectives.size(); ++i)
      CHECK(sol.fw_objectives[i] <= sol.fw_objectives[i - 1] + 1e-15 * sol.fw_objectives.front());
  }
  const DesignMatrix x = sample_gaussian_design(30, 60, rng.fork(7));
  const RegressionInstance big = sample_instance(x, Vector::Zero(60), rng.fork(8));
  LseOptions no_accel;
  no_accel.accelerate = false;
  const LseSolution sol = solve_lse(big, ConvexBody::lp_ball(60, 1.0), 1.0, no_accel);
  for (std::size_t i = 1; i < sol.fw_objectives.size(); ++i)
    CHECK(sol.fw_objectives[i] <= sol.fw_objectives[i - 1] + 1e-15 * sol.fw_objectives.front());
}

TEST_CASE("scaling the body matches scaling the radius") {
  RngStream rng(34);
  const DesignMatrix x = sample_gaussian_design(25, 30, rng.fork(1));
  const RegressionInstance inst = sample_instance(x, Vector::Zero(30), rng.fork(2));
  for (double p : {1.0, 1.5, 2.0}) {
    const ConvexBody body = ConvexBody::lp_ball(30, p);
    for (double tau : {0.3, 2.5}) {
      const LseSolution direct = solve_lse(inst, body, tau);
      const LseSolution scaled = solve_lse(inst, scale(body, tau), 1.0);
      CHECK((direct.predictions - scaled.predictions).norm() <= 10.0 * direct.tolerance);
      CHECK(membership(body, direct.alpha / tau, 1e-6));
    }
  }
}

TEST_CASE("risk of the estimator") {
  RngStream rng(35);
  const DesignMatrix x = sample_gaussian_design(30, 10, rng.fork(1));
  Vector truth = Vector::Zero(10);
  truth(1) = 0.5;
  truth(4) = -0.3;
  const RegressionInstance clean = sample_instance(x, truth, rng.fork(2), 0.0);
  const LseSolution sol = solve_lse(clean, ConvexBody::lp_ball(10, 1.0), 1.0);
  CHECK(lse_risk(clean, sol) <= 2.0 * sol.tolerance);
  LseSolution at_truth = sol;
  at_truth.alpha = truth;
  CHECK(lse_risk(clean, at_truth) == 0.0);
  const RegressionInstance blind = make_instance(x, clean.y);
  CHECK_THROWS_AS(lse_risk(blind, sol), InvalidArgument);
}

TEST_CASE("smallest hard-design cell has finite positive risk") {
  const DesignMatrix x = build_hard_design(10, 10, 1.0);
  const ConvexBody body = ConvexBody::lp_ball(10, 1.0);
  double mean = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const RegressionInstance inst = sample_instance(x, Vector::Zero(10), RngStream(36, seed));
    mean += lse_risk(inst, solve_lse(inst, body, 1.0)) / 20.0;
  }
  CHECK(std::isfinite(mean));
  CHECK(mean > 0.0);
}

TEST_CASE("budget exhaustion carries the partial solution") {
  RngStream rng(37);
  const DesignMatrix x = sample_gaussian_design(30, 60, rng.fork(1));
  const RegressionInstance inst = sample_instance(x, Vector::Zero(60), rng.fork(2));
  LseOptions opts;
  opts.accelerate = false;
  opts.away_steps = false;
  opts.max_iters = 3;
  opts.tol = 1e-12;
  try {
    solve_lse(inst, ConvexBody::lp_ball(60, 1.5), 1.0, opts);
    FAIL("expected a partial result");
  } catch (const LsePartialResult& partial) {
    CHECK(partial.gap() > 1e-12);
    CHECK(partial.partial().iterations == 3);
    CHECK(membership(ConvexBody::lp_ball(60, 1.5), partial.partial().alpha, 1e-9));
  }
  CHECK_THROWS_AS(solve_lse(inst, ConvexBody::lp_ball(60, 1.0), 1.0, 0.0, 10), InvalidArgument);
}

TEST_CASE("a response just outside a Euclidean body is certified after a restart") {
  // The accelerated phase must test the gap when it restarts; before that it
  // ran this cell to the iteration budget.
  const Index n = 640;
  const DesignMatrix x = build_hard_design(n, n, 2.0);
  const ConvexBody body = ConvexBody::lp_ball(n, 2.0);
  for (int rep = 0; rep < 20; ++rep) {
    const RegressionInstance inst =
        make_instance(x, draw_noise(RngStream(20240601).fork(0).fork(rep), n), Vector::Zero(n));
    const LseSolution sol = solve_lse(inst, body, 1.0);
    CHECK(sol.fw_gap <= sol.tolerance);
    CHECK(sol.iterations <= 50);
  }
}
