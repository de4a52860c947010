#include "esmd/mirror_descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace esmd {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive and finite");
}

// Minimizes F(a) = psi(a) + <linear, a> + weight R_n(a). The risk term is
// absent for an explicit step (linear = eta grad - grad psi(alpha)) and
// present for an implicit one (linear = -grad psi(alpha)).
struct ProxObjective {
  const Potential& psi;
  Vector linear;
  const RegressionInstance* risk = nullptr;
  double weight = 0.0;
  Matrix gram{};  // (2/n) X'X when the risk term is present

  double value(const Vector& a) const {
    double f = psi.value(a) + linear.dot(a);
    if (risk) f += weight * empirical_risk(*risk, a);
    return f;
  }
  Vector gradient(const Vector& a) const {
    Vector g = psi.gradient(a) + linear;
    if (risk) g += weight * empirical_risk_gradient(*risk, a);
    return g;
  }
  Matrix hessian(const Vector& a) const {
    Matrix h = psi.hessian(a);
    if (risk) h += weight * gram;
    return h;
  }
};

// Accepts a trial point by sufficient decrease, or, once function values are
// at rounding level, by a smaller gradient.
bool accept(double f_new, double f_old, double decrease, double g_new, double g_old) {
  if (f_new <= f_old + 1e-4 * decrease) return true;
  return f_new <= f_old + 1e-14 * (1.0 + std::abs(f_old)) && g_new < g_old;
}

Vector newton_minimize(const ProxObjective& obj, Vector x, double target) {
  double f = obj.value(x);
  Vector g = obj.gradient(x);
  for (int it = 0; it < 500 && g.norm() > target; ++it) {
    const Eigen::LLT<Matrix> llt(obj.hessian(x));
    Vector step = llt.info() == Eigen::Success ? Vector(llt.solve(-g)) : Vector(-g);
    if (!step.allFinite()) step = -g;
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls) {
      const Vector cand = x + t * step;
      const double fc = obj.value(cand);
      const Vector gc = obj.gradient(cand);
      if (std::isfinite(fc) && accept(fc, f, t * g.dot(step), gc.norm(), g.norm())) {
        x = cand;
        f = fc;
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  if (g.norm() > target) throw ConvergenceError("proximal_step: Newton stalled", g.norm());
  return x;
}

Vector bfgs_minimize(const ProxObjective& obj, Vector x, double target) {
  const Index d = x.size();
  double f = obj.value(x);
  Vector g = obj.gradient(x);
  Matrix inv_h = Matrix::Identity(d, d);
  bool scaled = false;
  for (int it = 0; it < 5000 && g.norm() > target; ++it) {
    Vector dir = -(inv_h * g);
    if (!(dir.dot(g) < 0.0)) {
      inv_h.setIdentity();
      dir = -g;
    }
    double t = 1.0;
    bool moved = false;
    Vector cand;
    Vector gc;
    for (int ls = 0; ls < 80; ++ls) {
      cand = x + t * dir;
      const double fc = obj.value(cand);
      gc = obj.gradient(cand);
      if (std::isfinite(fc) && accept(fc, f, t * g.dot(dir), gc.norm(), g.norm())) {
        f = fc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    const Vector s = cand - x;
    const Vector yv = gc - g;
    const double sy = s.dot(yv);
    x = cand;
    g = gc;
    if (sy > 1e-300) {
      if (!scaled) {
        inv_h *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double r = 1.0 / sy;
      const Vector hy = inv_h * yv;
      inv_h += (r * r * (sy + yv.dot(hy))) * (s * s.transpose()) - r * (hy * s.transpose() + s * hy.transpose());
    }
  }
  if (g.norm() > target) throw ConvergenceError("proximal_step: quasi-Newton stalled", g.norm());
  return x;
}

struct Tracker {
  const RegressionInstance& inst;
  const MdConfig& cfg;
  RiskTrace& trace;
  Vector x_truth;  // X alpha*
  bool has_truth;
  double risk0 = 0.0;
  double n;

  Tracker(const RegressionInstance& i, const MdConfig& c, RiskTrace& t)
      : inst(i), cfg(c), trace(t), has_truth(i.ground_truth.has_value()), n(static_cast<double>(i.n())) {
    if (has_truth) x_truth = i.design.matrix() * *i.ground_truth;
  }

  // Residual r = X alpha - y is shared by both risks and the gradient.
  void observe(std::size_t step, double time, const Vector& alpha, const Vector& residual, bool record) {
    const double emp = residual.squaredNorm() / n;
    if (step == 0) risk0 = emp;
    if (!std::isfinite(emp) || emp > 1e6 * std::max(risk0, std::numeric_limits<double>::min()))
      throw DivergenceError("mirror descent diverged at step " + std::to_string(step) +
                            " (empirical risk " + std::to_string(emp) + ")");
    double ins = 0.0;
    if (has_truth) {
      ins = (residual + inst.y - x_truth).squaredNorm() / n;
      if (step == 0 || ins < trace.best_in_sample_risk) {
        trace.best_in_sample_risk = ins;
        trace.best_step = step;
        trace.best_iterate = alpha;
        trace.max_gauge_to_best = running_gauge;
      }
    }
    if (!record) return;
    trace.iterate_indices.push_back(step);
    trace.times.push_back(time);
    trace.empirical_risks.push_back(emp);
    if (has_truth) {
      trace.in_sample_risks.push_back(ins);
      if (cfg.record_bregman) trace.bregman_to_truth.push_back(cfg.potential.bregman(*inst.ground_truth, alpha));
    }
  }

  // Largest gauge seen so far; copied into max_gauge_to_best at each new best.
  double running_gauge = 0.0;
  void gauge(const Vector& alpha) {
    if (cfg.gauge_body) running_gauge = std::max(running_gauge, minkowski(*cfg.gauge_body, alpha));
  }

  void finish(const Vector& alpha) {
    trace.final_iterate = alpha;
    if (has_truth) trace.oracle_t_star = oracle_stop(trace);
  }
};

void validate(const RegressionInstance& inst, const MdConfig& cfg) {
  if (cfg.potential.dim() != inst.d()) throw InvalidArgument("md_run: potential dimension mismatch");
  require_positive(cfg.tau, "tau");
  require_positive(cfg.epsilon, "epsilon");
  if (cfg.record_every < 1) throw InvalidArgument("md_run: record_every must be >= 1");
  if (cfg.eta) require_positive(*cfg.eta, "eta");
}

}  // namespace

Vector md_step_discrete(const Potential& psi, const Vector& alpha, const Vector& grad, double eta) {
  require_positive(eta, "eta");
  if (!psi.caps().discrete_ok) throw InvalidArgument("md_step_discrete: potential is continuous-time only");
  return psi.inverse_gradient(psi.gradient(alpha) - eta * grad);
}

Vector proximal_step(const Potential& psi, const Vector& alpha, const Vector& grad, double eta) {
  require_positive(eta, "eta");
  if (!psi.caps().discrete_ok) throw InvalidArgument("proximal_step: potential is continuous-time only");
  require_length(alpha, psi.dim(), "proximal_step");
  require_length(grad, psi.dim(), "proximal_step gradient");
  if (psi.kind() == PotentialKind::SquaredL2) return alpha - 0.5 * eta * grad;
  const Vector anchor = psi.gradient(alpha);
  const ProxObjective obj{psi, eta * grad - anchor};
  const double target = 1e-10 * (1.0 + anchor.norm() + eta * grad.norm());
  if (psi.caps().continuous_ok) return newton_minimize(obj, alpha, target);
  return bfgs_minimize(obj, alpha, target);
}

std::uint64_t stopping_horizon_discrete(double c_u, double tau, double epsilon, double eta) {
  require_positive(c_u, "c_u");
  require_positive(tau, "tau");
  require_positive(epsilon, "epsilon");
  require_positive(eta, "eta");
  const double v = 2.0 * c_u * c_u * tau * tau / (epsilon * eta);
  // Quotients that are integers up to rounding are not bumped by the ceiling.
  const double nearest = std::round(v);
  const double t = std::abs(v - nearest) <= 1e-9 * std::max(1.0, v) ? nearest : std::ceil(v);
  if (t >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::max(1.0, t));
}

double stopping_horizon_continuous(double c_u, double tau, double epsilon) {
  require_positive(c_u, "c_u");
  require_positive(tau, "tau");
  require_positive(epsilon, "epsilon");
  return c_u * c_u * tau * tau / epsilon;
}

double step_size_bound(const Potential& psi, double beta, double d_upper) {
  if (!psi.caps().discrete_ok) throw InvalidArgument("step_size_bound: potential is continuous-time only");
  require_positive(beta, "beta");
  require_positive(d_upper, "divergence bound");
  return std::min(psi.constants().rho / beta, 0.5 * d_upper);
}

double resolve_step_size(const RegressionInstance& instance, const Potential& psi, double tau, double* certified) {
  const double beta = smoothness_constant(instance.design, psi.constants().rho_norm);
  const double c_u = psi.constants().c_u;
  const double cert = step_size_bound(psi, beta, c_u * c_u * tau * tau);
  if (certified) *certified = cert;
  if (instance.ground_truth) {
    const double exact = psi.bregman(*instance.ground_truth, Vector::Zero(instance.d()));
    if (exact > 0.0) return step_size_bound(psi, beta, exact);
  }
  return cert;
}

std::size_t oracle_stop(const RiskTrace& trace) {
  if (trace.in_sample_risks.empty()) throw InvalidArgument("oracle_stop: trace has no in-sample risks");
  const auto it = std::min_element(trace.in_sample_risks.begin(), trace.in_sample_risks.end());
  return static_cast<std::size_t>(std::distance(trace.in_sample_risks.begin(), it));
}

double offset_condition_gap(const RegressionInstance& instance, const Vector& alpha, const Vector& truth,
                            double epsilon) {
  return empirical_risk(instance, alpha) - empirical_risk(instance, truth) +
         in_sample_risk(instance.design, alpha, truth) - epsilon;
}

RiskTrace md_run(const RegressionInstance& instance, const MdConfig& cfg) {
  if (std::holds_alternative<ContinuousMode>(cfg.mode)) return md_run_continuous(instance, cfg);
  validate(instance, cfg);
  const Potential& psi = cfg.potential;
  if (!psi.caps().discrete_ok) throw InvalidArgument("md_run: potential is continuous-time only");
  RiskTrace trace;
  double certified = 0.0;
  trace.resolved_eta = cfg.eta ? *cfg.eta : resolve_step_size(instance, psi, cfg.tau, &certified);
  trace.eta_certified = cfg.eta ? *cfg.eta : certified;
  const double eta = trace.resolved_eta;
  const double c_u = psi.constants().c_u;
  trace.horizon_T = stopping_horizon_discrete(c_u, cfg.tau, cfg.epsilon, eta);
  trace.horizon = static_cast<double>(trace.horizon_T);
  if (instance.ground_truth) {
    const double level = psi.bregman(*instance.ground_truth, Vector::Zero(instance.d())) +
                         eta * empirical_risk(instance, *instance.ground_truth);
    trace.proof_level_horizon = std::ceil(2.0 * level / (cfg.epsilon * eta));
  }
  const std::uint64_t steps = std::min<std::uint64_t>(trace.horizon_T, cfg.max_iters);
  trace.truncated = steps < trace.horizon_T;

  const Matrix& x = instance.design.matrix();
  const double scale = 2.0 / static_cast<double>(instance.n());
  Tracker tracker(instance, cfg, trace);
  Vector alpha = Vector::Zero(instance.d());
  Vector dual = psi.gradient(alpha);
  Vector residual = -instance.y;
  tracker.gauge(alpha);
  tracker.observe(0, 0.0, alpha, residual, true);
  for (std::uint64_t t = 1; t <= steps; ++t) {
    // Dual-space accumulation: grad psi(alpha_t) is carried exactly.
    dual.noalias() -= (eta * scale) * (x.transpose() * residual);
    alpha = psi.inverse_gradient(dual);
    residual.noalias() = x * alpha - instance.y;
    tracker.gauge(alpha);
    tracker.observe(t, static_cast<double>(t), alpha, residual, t % cfg.record_every == 0 || t == steps);
  }
  tracker.finish(alpha);
  return trace;
}

RiskTrace md_run_continuous(const RegressionInstance& instance, const MdConfig& cfg) {
  validate(instance, cfg);
  const auto* mode = std::get_if<ContinuousMode>(&cfg.mode);
  if (!mode) throw InvalidArgument("md_run_continuous: config is not in continuous mode");
  require_positive(mode->dt, "dt");
  const Potential& psi = cfg.potential;
  if (!psi.caps().continuous_ok) throw InvalidArgument("md_run_continuous: potential lacks a Hessian");
  RiskTrace trace;
  trace.horizon = stopping_horizon_continuous(psi.constants().c_u, cfg.tau, cfg.epsilon);
  const Matrix& x = instance.design.matrix();
  const double scale = 2.0 / static_cast<double>(instance.n());

  auto field = [&](const Vector& a) -> Vector {
    const Vector grad = scale * (x.transpose() * (x * a - instance.y));
    const Eigen::LLT<Matrix> llt(psi.hessian(a));
    if (llt.info() != Eigen::Success) throw IntegrationError("md_run_continuous: Hessian is not positive definite");
    Vector v = llt.solve(-grad);
    if (!v.allFinite()) throw IntegrationError("md_run_continuous: non-finite velocity");
    return v;
  };
  ProxObjective implicit{psi, Vector(), &instance, 0.0, Matrix()};
  if (mode->integrator == Integrator::ImplicitEuler) implicit.gram = scale * (x.transpose() * x);
  // grad psi(a) + h grad R_n(a) = grad psi(alpha) at the implicit step.
  auto advance = [&](const Vector& a, double h) -> Vector {
    if (mode->integrator == Integrator::Rk4) {
      const Vector k1 = field(a);
      const Vector k2 = field(a + 0.5 * h * k1);
      const Vector k3 = field(a + 0.5 * h * k2);
      const Vector k4 = field(a + h * k3);
      return a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    implicit.linear = -psi.gradient(a);
    implicit.weight = h;
    const double target = 1e-10 * (1.0 + implicit.linear.norm() + h * empirical_risk_gradient(instance, a).norm());
    return newton_minimize(implicit, a, target);
  };

  Tracker tracker(instance, cfg, trace);
  Vector alpha = Vector::Zero(instance.d());
  Vector residual = -instance.y;
  double risk = residual.squaredNorm() / static_cast<double>(instance.n());
  const double risk0 = risk;
  tracker.gauge(alpha);
  tracker.observe(0, 0.0, alpha, residual, true);
  double t = 0.0;
  double dt = mode->dt;
  int halvings = 0;
  std::size_t step = 0;
  const double end = trace.horizon;
  while (t < end * (1.0 - 1e-14) && step < cfg.max_iters) {
    const double h = std::min(dt, end - t);
    const Vector next = advance(alpha, h);
    const Vector next_residual = x * next - instance.y;
    const double next_risk = next_residual.squaredNorm() / static_cast<double>(instance.n());
    if (!(next_risk <= 1.1 * risk + 1e-14 * risk0)) {
      if (++halvings > 10) throw IntegrationError("md_run_continuous: risk increase persists after 10 halvings");
      dt *= 0.5;
      continue;
    }
    alpha = next;
    residual = next_residual;
    risk = next_risk;
    t += h;
    ++step;
    tracker.gauge(alpha);
    const bool last = !(t < end * (1.0 - 1e-14)) || step == cfg.max_iters;
    tracker.observe(step, t, alpha, residual, step % cfg.record_every == 0 || last);
  }
  trace.truncated = t < end * (1.0 - 1e-14);
  trace.horizon_T = step;
  trace.final_dt = dt;
  tracker.finish(alpha);
  return trace;
}

}  // namespace esmd
