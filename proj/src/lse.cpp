#include "esmd/lse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace esmd {

namespace {

struct Problem {
  const Matrix& x;
  const Vector& y;
  ConvexBody body;  // already scaled by tau
  double inv_n;

  Vector gradient_from_residual(const Vector& r) const { return (2.0 * inv_n) * (x.transpose() * r); }
  double gap(const Vector& alpha, const Vector& grad) const {
    return grad.dot(alpha - lmo(body, -grad).coords);
  }
};

LseSolution finish(const Problem& prob, Vector alpha, const Vector& residual, double gap, std::size_t iters,
                   double tol, std::vector<double> history) {
  LseSolution s;
  s.predictions = residual + prob.y;
  s.objective = residual.squaredNorm() * prob.inv_n;
  s.alpha = std::move(alpha);
  s.fw_gap = std::max(gap, 0.0);
  s.iterations = iters;
  s.tolerance = tol;
  s.fw_objectives = std::move(history);
  return s;
}

double line_step(const Vector& grad, const Vector& dir, const Vector& xdir, double inv_n, double cap) {
  const double descent = -grad.dot(dir);
  const double curvature = 2.0 * inv_n * xdir.squaredNorm();
  if (curvature <= 0.0) return descent > 0.0 ? cap : 0.0;
  return std::clamp(descent / curvature, 0.0, cap);
}

// FISTA with function-value restart; returns true if the gap certified.
bool accelerated_phase(const Problem& prob, double lipschitz, Vector& alpha, Vector& residual, double& gap,
                       std::size_t& iters, std::size_t budget, double tol) {
  Vector xa = prob.x * alpha;
  Vector y_pt = alpha;
  Vector xy = xa;
  double f = (xa - prob.y).squaredNorm() * prob.inv_n;
  double t = 1.0;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t since_improve = 0;
  std::size_t accepted = 0;
  for (std::size_t k = 0; k < budget; ++k) {
    ++iters;
    const Vector grad_y = prob.gradient_from_residual(xy - prob.y);
    Vector next = project_euclidean(prob.body, y_pt - grad_y / lipschitz).coords;
    Vector x_next = prob.x * next;
    const double f_next = (x_next - prob.y).squaredNorm() * prob.inv_n;
    // A restart from a momentum-free point would loop forever on rounding noise.
    if (f_next > f && t > 1.0) {
      y_pt = alpha;
      xy = xa;
      t = 1.0;
      // Restarts also fire on rounding noise at the optimum, so certify here.
      residual = xa - prob.y;
      gap = prob.gap(alpha, prob.gradient_from_residual(residual));
      if (gap <= tol) return true;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    y_pt = next + beta * (next - alpha);
    xy = x_next + beta * (x_next - xa);
    alpha = std::move(next);
    xa = std::move(x_next);
    f = f_next;
    t = t_next;
    if (++accepted % 5 == 0) {
      residual = xa - prob.y;
      gap = prob.gap(alpha, prob.gradient_from_residual(residual));
      if (gap <= tol) return true;
      if (gap < 0.5 * best_gap) {
        best_gap = gap;
        since_improve = 0;
      } else if (++since_improve > 400) {
        break;  // stalled; hand over to conditional gradient
      }
    }
  }
  residual = xa - prob.y;
  gap = prob.gap(alpha, prob.gradient_from_residual(residual));
  return gap <= tol;
}

}  // namespace

LseSolution solve_constrained_ls(const DesignMatrix& design, const Vector& y, const ConvexBody& body, double tau,
                                 const LseOptions& options) {
  require_length(y, design.rows(), "solve_lse response");
  if (body.dim() != design.cols()) throw InvalidArgument("solve_lse: body dimension mismatch");
  if (!(tau > 0.0)) throw InvalidArgument("solve_lse: tau must be positive");
  const Problem prob{design.matrix(), y, tau == 1.0 ? body : scale(body, tau),
                     1.0 / static_cast<double>(design.rows())};
  const double tol = options.tol.value_or(1e-8 * (1.0 + y.squaredNorm() * prob.inv_n));
  if (!(tol > 0.0)) throw InvalidArgument("solve_lse: tolerance must be positive");
  double target = tol;
  if (options.prediction_tol) {
    if (!(*options.prediction_tol > 0.0)) throw InvalidArgument("solve_lse: prediction tolerance must be positive");
    target = std::min(tol, *options.prediction_tol * *options.prediction_tol);
  }
  const Index d = design.cols();

  Vector alpha = options.start ? *options.start : Vector(Vector::Zero(d));
  require_length(alpha, d, "solve_lse start");
  std::size_t iters = 0;
  double gap = 0.0;
  Vector residual;

  if (options.accelerate && supports_projection(prob.body)) {
    alpha = project_euclidean(prob.body, alpha).coords;
    const double sigma = design.spectral_norm();
    const double lipschitz = std::max(2.0 * sigma * sigma * prob.inv_n, 1e-300);
    if (accelerated_phase(prob, lipschitz, alpha, residual, gap, iters, options.max_iters, target))
      return finish(prob, alpha, residual, gap, iters, tol, {});
  }

  std::vector<double> history;
  const bool away = options.away_steps.value_or(true) && has_atoms(prob.body);
  Vector weights;
  if (away) {
    const Index count = atom_count(prob.body);
    weights = Vector::Zero(count);
    const bool l1 = prob.body.kind() == ConvexBody::Kind::Scaled ? prob.body.inner().kind() == ConvexBody::Kind::LpBall
                                                                 : prob.body.kind() == ConvexBody::Kind::LpBall;
    const double radius = prob.body.kind() == ConvexBody::Kind::Scaled ? prob.body.factor() : 1.0;
    const bool untranslated = prob.body.kind() == ConvexBody::Kind::LpBall ||
                              (prob.body.kind() == ConvexBody::Kind::Scaled &&
                               prob.body.inner().kind() == ConvexBody::Kind::LpBall);
    if (l1 && untranslated && minkowski(prob.body, alpha) <= 1.0 + 1e-12) {
      // alpha = sum_j |alpha_j|/r (sign_j r e_j) + slack (r e_0 - r e_0)/2.
      double used = 0.0;
      for (Index j = 0; j < d; ++j) {
        const double w = std::abs(alpha(j)) / radius;
        weights(alpha(j) >= 0.0 ? 2 * j : 2 * j + 1) += w;
        used += w;
      }
      const double rest = std::max(0.0, 1.0 - used);
      weights(0) += 0.5 * rest;
      weights(1) += 0.5 * rest;
      weights /= weights.sum();
      alpha = Vector::Zero(d);
      for (Index i = 0; i < count; ++i)
        if (weights(i) > 0.0) alpha += weights(i) * atom(prob.body, i);
    } else {
      const Vector g0 = prob.gradient_from_residual(prob.x * alpha - y);
      const Index s = best_atom(prob.body, -g0);
      weights(s) = 1.0;
      alpha = atom(prob.body, s);
    }
  } else if (!membership(prob.body, alpha, 1e-9)) {
    alpha = lmo(prob.body, Vector::Zero(d)).coords;
  }

  residual = prob.x * alpha - y;
  history.push_back(residual.squaredNorm() * prob.inv_n);
  for (; iters < options.max_iters; ++iters) {
    const Vector grad = prob.gradient_from_residual(residual);
    Vector dir;
    double cap = 1.0;
    Index fw_atom = -1;
    Index away_atom = -1;
    if (away) {
      fw_atom = best_atom(prob.body, -grad);
      const Vector s = atom(prob.body, fw_atom);
      gap = grad.dot(alpha - s);
      if (gap <= target) break;
      double worst = -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < weights.size(); ++i) {
        if (weights(i) <= 0.0) continue;
        const double score = grad.dot(atom(prob.body, i));
        if (score > worst) {
          worst = score;
          away_atom = i;
        }
      }
      const Vector v = atom(prob.body, away_atom);
      const double away_gap = grad.dot(v - alpha);
      if (gap >= away_gap || weights(away_atom) >= 1.0) {
        dir = s - alpha;
        away_atom = -1;
      } else {
        dir = alpha - v;
        const double wv = weights(away_atom);
        cap = wv / (1.0 - wv);
        fw_atom = -1;
      }
    } else {
      const Vector s = lmo(prob.body, -grad).coords;
      gap = grad.dot(alpha - s);
      if (gap <= target) break;
      dir = s - alpha;
    }
    const Vector xdir = prob.x * dir;
    const double step = line_step(grad, dir, xdir, prob.inv_n, cap);
    if (step <= 0.0 && away_atom < 0) break;  // no descent left at this precision
    alpha += step * dir;
    residual += step * xdir;
    if (away) {
      if (fw_atom >= 0) {
        weights *= (1.0 - step);
        weights(fw_atom) += step;
      } else {
        weights *= (1.0 + step);
        weights(away_atom) -= step;
        if (step >= cap || weights(away_atom) < 1e-15) weights(away_atom) = 0.0;
      }
      // Recompute from atoms periodically to stop drift.
      if (iters % 200 == 199) {
        weights /= weights.sum();
        alpha.setZero();
        for (Index i = 0; i < weights.size(); ++i)
          if (weights(i) > 0.0) alpha += weights(i) * atom(prob.body, i);
        residual = prob.x * alpha - y;
      }
    }
    history.push_back(residual.squaredNorm() * prob.inv_n);
  }
  gap = prob.gap(alpha, prob.gradient_from_residual(residual));
  LseSolution sol = finish(prob, alpha, residual, gap, iters, tol, std::move(history));
  if (gap > target) throw LsePartialResult(std::move(sol));
  return sol;
}

LseSolution solve_lse(const RegressionInstance& instance, const ConvexBody& body, double tau,
                      const LseOptions& options) {
  return solve_constrained_ls(instance.design, instance.y, body, tau, options);
}

LseSolution solve_lse(const RegressionInstance& instance, const ConvexBody& body, double tau, double tol,
                      std::size_t max_iters) {
  LseOptions opts;
  opts.tol = tol;
  opts.max_iters = max_iters;
  return solve_lse(instance, body, tau, opts);
}

double lse_risk(const RegressionInstance& instance, const LseSolution& solution) {
  if (!instance.ground_truth) throw InvalidArgument("lse_risk: instance has no ground truth");
  return in_sample_risk(instance.design, solution.alpha, *instance.ground_truth);
}

}  // namespace esmd
