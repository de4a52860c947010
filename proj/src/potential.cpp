#include "esmd/potential.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace esmd {

Matrix Potential::Model::hessian(const Vector&) const {
  throw UnsupportedOperation("hessian: " + name + " is not twice differentiable");
}

Potential::Potential(std::shared_ptr<const Model> model) : model_(std::move(model)) {
  if (!model_) throw InvalidArgument("Potential: null model");
}

std::optional<double> Potential::parameter(const std::string& key) const {
  for (const auto& [k, v] : model_->parameters)
    if (k == key) return v;
  return std::nullopt;
}

double Potential::value(const Vector& alpha) const {
  require_length(alpha, dim(), "potential value");
  return model_->value(alpha);
}

Vector Potential::gradient(const Vector& alpha) const {
  require_length(alpha, dim(), "potential gradient");
  return model_->gradient(alpha);
}

Matrix Potential::hessian(const Vector& alpha) const {
  require_length(alpha, dim(), "potential hessian");
  if (!caps().continuous_ok) throw UnsupportedOperation("hessian: " + name() + " has no second derivatives");
  return model_->hessian(alpha);
}

Vector Potential::inverse_gradient(const Vector& z) const {
  require_length(z, dim(), "inverse_gradient");
  if (!z.allFinite()) throw InvalidArgument("inverse_gradient: non-finite input");
  return model_->inverse_gradient(z);
}

double Potential::bregman(const Vector& alpha, const Vector& base) const {
  require_length(alpha, dim(), "bregman");
  require_length(base, dim(), "bregman base");
  if (kind() == PotentialKind::SquaredL2) return (alpha - base).squaredNorm();
  return model_->value(alpha) - model_->value(base) - model_->gradient(base).dot(alpha - base);
}

namespace {

// Forwards every evaluation and replaces the approximation constants.
class ReconstantedModel final : public Potential::Model {
 public:
  ReconstantedModel(Potential base, double c_l, double c_u) : base_(std::move(base)) {
    kind = base_.kind();
    dim = base_.dim();
    constants = base_.constants();
    constants.c_l = c_l;
    constants.c_u = c_u;
    constants.c_a = c_l * c_u;
    caps = base_.caps();
    name = base_.name();
    parameters = base_.parameters();
  }
  double value(const Vector& a) const override { return base_.value(a); }
  Vector gradient(const Vector& a) const override { return base_.gradient(a); }
  Matrix hessian(const Vector& a) const override { return base_.hessian(a); }
  Vector inverse_gradient(const Vector& z) const override { return base_.inverse_gradient(z); }

 private:
  Potential base_;
};

void check_inverse(const Potential::Model& m, const Vector& alpha, const Vector& z) {
  const double residual = (m.gradient(alpha) - z).norm();
  if (!(residual <= 1e-8 * (1.0 + z.norm())))
    throw ConvergenceError("inverse_gradient: " + m.name + " did not reach tolerance", residual);
}

void fill_constants(Potential::Model& m, double rho, NormTag norm, double c_l, double c_u) {
  m.constants.rho = rho;
  m.constants.rho_norm = norm;
  m.constants.c_l = c_l;
  m.constants.c_u = c_u;
  m.constants.c_a = c_l * c_u;
}

// ---------------------------------------------------------------- squared l2

class SquaredL2Model final : public Potential::Model {
 public:
  explicit SquaredL2Model(Index d) {
    kind = PotentialKind::SquaredL2;
    dim = d;
    name = "squared_l2";
    fill_constants(*this, 2.0, NormTag::l2(), 1.0, 1.0);
    caps = {true, true, true};
  }
  double value(const Vector& a) const override { return a.squaredNorm(); }
  Vector gradient(const Vector& a) const override { return 2.0 * a; }
  Matrix hessian(const Vector&) const override { return 2.0 * Matrix::Identity(dim, dim); }
  Vector inverse_gradient(const Vector& z) const override { return 0.5 * z; }
};

// ---------------------------------------------------------------- squared lp

double lp_norm_scaled(const Vector& v, double p, double scale) {
  return scale * std::pow((v.array().abs() / scale).pow(p).sum(), 1.0 / p);
}

// grad |a|_p^2 = 2 sign(a) |a|^{p-1} |a|_p^{2-p}; positively 1-homogeneous.
Vector squared_lp_gradient(const Vector& a, double p) {
  const double s = a.lpNorm<Eigen::Infinity>();
  if (s == 0.0) return Vector::Zero(a.size());
  const Eigen::ArrayXd r = a.array().abs() / s;
  const double nrm = std::pow(r.pow(p).sum(), 1.0 / p);
  const Eigen::ArrayXd mag = 2.0 * s * r.pow(p - 1.0) * std::pow(nrm, 2.0 - p);
  return (a.array().sign() * mag).matrix();
}

class SquaredLpModel final : public Potential::Model {
 public:
  SquaredLpModel(Index d, double p, double c_l, double c_u) : p_(p), q_(p / (p - 1.0)) {
    kind = PotentialKind::SquaredLp;
    dim = d;
    name = "squared_lp";
    fill_constants(*this, 2.0 * (p - 1.0), NormTag::lp(p), c_l, c_u);
    caps = {false, true, true};
    parameters = {{"p", p}};
  }
  double value(const Vector& a) const override {
    const double s = a.lpNorm<Eigen::Infinity>();
    if (s == 0.0) return 0.0;
    const double nrm = lp_norm_scaled(a, p_, s);
    return nrm * nrm;
  }
  Vector gradient(const Vector& a) const override { return squared_lp_gradient(a, p_); }
  // (grad)^{-1}(z) = (1/2) sign(z) |z|^{q-1} |z|_q^{2-q}.
  Vector inverse_gradient(const Vector& z) const override {
    const double s = z.lpNorm<Eigen::Infinity>();
    if (s == 0.0) return Vector::Zero(z.size());
    const Eigen::ArrayXd r = z.array().abs() / s;
    const double nrm = std::pow(r.pow(q_).sum(), 1.0 / q_);
    const Eigen::ArrayXd mag = 0.5 * s * r.pow(q_ - 1.0) * std::pow(nrm, 2.0 - q_);
    Vector out = (z.array().sign() * mag).matrix();
    check_inverse(*this, out, z);
    return out;
  }

 private:
  double p_;
  double q_;
};

// ------------------------------------------------- separable squared family
//
// psi(a) = S(a)^2 + (rho/2)|a|^2 with S(a) = offset + sum_i g(a_i).
// Inversion reduces to one monotone scalar equation in S: each coordinate of
// 2 S g'(a_i) + rho a_i = z_i has a closed form once S is fixed.

struct HuberScalar {
  double lambda;
  double g(double x) const {
    const double ax = std::abs(x);
    return ax <= lambda ? x * x / (2.0 * lambda) : ax - 0.5 * lambda;
  }
  double d1(double x) const { return std::abs(x) <= lambda ? x / lambda : (x > 0.0 ? 1.0 : -1.0); }
  double d2(double x) const { return std::abs(x) <= lambda ? 1.0 / lambda : 0.0; }
  double solve(double s, double z, double rho, double& dads) const {
    const double kappa = 2.0 * s / lambda + rho;
    if (std::abs(z) <= kappa * lambda) {
      dads = -2.0 * z / (lambda * kappa * kappa);
      return z / kappa;
    }
    const double sign = z > 0.0 ? 1.0 : -1.0;
    dads = -2.0 * sign / rho;
    return sign * (std::abs(z) - 2.0 * s) / rho;
  }
};

struct HypentropyScalar {
  double gamma;
  double c;  // 1 / asinh(1/gamma)
  double g(double x) const {
    const double root = std::sqrt(x * x + gamma * gamma);
    return c * (x * std::asinh(x / gamma) - x * x / (root + gamma) + 1.0);
  }
  double d1(double x) const { return c * std::asinh(x / gamma); }
  double d2(double x) const { return c / std::sqrt(x * x + gamma * gamma); }
  double solve(double s, double z, double, double& dads) const {
    const double w = z / (2.0 * s * c);
    dads = -w * gamma * std::cosh(w) / s;
    return gamma * std::sinh(w);
  }
};

struct SigmoidScalar {
  double gamma;
  double g(double x) const {
    const double ax = std::abs(x);
    return ax + 2.0 * std::log1p(std::exp(-gamma * ax)) / gamma;
  }
  double d1(double x) const { return std::tanh(0.5 * gamma * x); }
  double d2(double x) const {
    const double ch = std::cosh(0.5 * gamma * x);
    return 0.5 * gamma / (ch * ch);
  }
  double solve(double s, double z, double, double& dads) const {
    const double v = z / (2.0 * s);
    dads = -2.0 * v / (s * gamma * (1.0 - v * v));
    return 2.0 * std::atanh(v) / gamma;
  }
};

template <class G>
class SeparableSquareModel final : public Potential::Model {
 public:
  SeparableSquareModel(G scalar, double offset, double rho) : g_(scalar), offset_(offset), rho_(rho) {}

  double sum(const Vector& a) const {
    double s = offset_;
    for (Index i = 0; i < a.size(); ++i) s += g_.g(a(i));
    return s;
  }
  double value(const Vector& a) const override {
    const double s = sum(a);
    return s * s + 0.5 * rho_ * a.squaredNorm();
  }
  Vector gradient(const Vector& a) const override {
    const double s = sum(a);
    Vector out(a.size());
    for (Index i = 0; i < a.size(); ++i) out(i) = 2.0 * s * g_.d1(a(i)) + rho_ * a(i);
    return out;
  }
  Matrix hessian(const Vector& a) const override {
    const double s = sum(a);
    Vector d1(a.size());
    Matrix h(a.size(), a.size());
    for (Index i = 0; i < a.size(); ++i) d1(i) = g_.d1(a(i));
    h.noalias() = 2.0 * d1 * d1.transpose();
    for (Index i = 0; i < a.size(); ++i) h(i, i) += 2.0 * s * g_.d2(a(i)) + rho_;
    return h;
  }
  Vector inverse_gradient(const Vector& z) const override {
    const Index d = z.size();
    if (z.lpNorm<Eigen::Infinity>() == 0.0) return Vector::Zero(d);
    Vector a(d);
    // phi(S) = S - offset - sum g(a_i(S)) is increasing; a non-finite value
    // means S lies below the admissible range.
    auto phi = [&](double s, double& slope) {
      double total = offset_;
      slope = 1.0;
      for (Index i = 0; i < d; ++i) {
        double dads = 0.0;
        a(i) = g_.solve(s, z(i), rho_, dads);
        total += g_.g(a(i));
        slope -= g_.d1(a(i)) * dads;
      }
      return s - total;
    };
    double lo = lower_bound(z);
    double hi = std::max(2.0 * lo, lo + 1.0);
    double slope = 0.0;
    for (int it = 0; !(phi(hi, slope) > 0.0); ++it) {
      lo = hi;
      hi *= 2.0;
      if (it > 2000) throw ConvergenceError("inverse_gradient: no bracket for " + name, hi);
    }
    double s = hi;
    double val = phi(s, slope);
    for (int it = 0; it < 300; ++it) {
      if (val > 0.0) hi = s; else lo = s;
      if (std::abs(val) <= 4.0 * std::numeric_limits<double>::epsilon() * s) break;
      if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
      double next = std::isfinite(val) && slope > 0.0 && std::isfinite(slope) ? s - val / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      s = next;
      val = phi(s, slope);
    }
    phi(s, slope);
    check_inverse(*this, a, z);
    return a;
  }

  // Smallest admissible S; phi(S) <= 0 there.
  std::function<double(const Vector&)> lower_bound;

 private:
  G g_;
  double offset_;
  double rho_;
};

// ---------------------------------------------------- log-sum-exp polytope

class LogSumExpHullModel final : public Potential::Model {
 public:
  LogSumExpHullModel(Matrix a, double gamma, double rho) : a_(std::move(a)), gamma_(gamma), rho_(rho) {
    log_m_ = std::log(static_cast<double>(a_.rows()));
  }

  // L = log(m sum_i exp(gamma <a_i, x>)) and softmax weights.
  double smooth_max(const Vector& x, Vector* weights) const {
    const Vector s = gamma_ * (a_ * x);
    const double top = s.maxCoeff();
    const Eigen::ArrayXd e = (s.array() - top).exp();
    const double total = e.sum();
    if (weights) *weights = (e / total).matrix();
    return log_m_ + top + std::log(total);
  }
  double value(const Vector& x) const override {
    const double l = smooth_max(x, nullptr) / gamma_;
    return l * l + 0.5 * rho_ * x.squaredNorm();
  }
  Vector gradient(const Vector& x) const override {
    Vector w;
    const double l = smooth_max(x, &w);
    return (2.0 * l / gamma_) * (a_.transpose() * w) + rho_ * x;
  }
  // 2 mu mu' + 2 L Cov_p(a) + rho I with mu = A'p.
  Matrix hessian(const Vector& x) const override {
    Vector w;
    const double l = smooth_max(x, &w);
    const Vector mu = a_.transpose() * w;
    Matrix cov = a_.transpose() * w.asDiagonal() * a_;
    cov.noalias() -= mu * mu.transpose();
    Matrix h = 2.0 * mu * mu.transpose() + 2.0 * l * cov;
    h.diagonal().array() += rho_;
    return 0.5 * (h + h.transpose());
  }
  Vector inverse_gradient(const Vector& z) const override {
    // Damped Newton on F(x) = psi(x) - <z, x>.
    Vector x = Vector::Zero(dim);
    const double target = 1e-10 * (1.0 + z.norm());
    double f = value(x) - z.dot(x);
    for (int it = 0; it < 500; ++it) {
      const Vector grad = gradient(x) - z;
      if (grad.norm() <= target) break;
      const Vector step = hessian(x).llt().solve(-grad);
      double t = 1.0;
      const double slope = grad.dot(step);
      for (int ls = 0; ls < 60; ++ls) {
        const Vector cand = x + t * step;
        const double fc = value(cand) - z.dot(cand);
        if (fc <= f + 1e-4 * t * slope || t * step.norm() <= 1e-16 * (1.0 + x.norm())) {
          x = cand;
          f = fc;
          break;
        }
        t *= 0.5;
      }
    }
    check_inverse(*this, x, z);
    return x;
  }

 private:
  Matrix a_;
  double gamma_;
  double rho_;
  double log_m_;
};

// ------------------------------------------- smooth norm plus ridge (l_p)

class SmoothNormModel final : public Potential::Model {
 public:
  SmoothNormModel(Index d, double p, double rho) : p_(p), rho_(rho) {
    kind = PotentialKind::SmoothNormPlusRidge;
    dim = d;
    name = "smooth_norm";
  }
  double norm(const Vector& a) const {
    const double s = a.lpNorm<Eigen::Infinity>();
    return s == 0.0 ? 0.0 : lp_norm_scaled(a, p_, s);
  }
  double value(const Vector& a) const override {
    const double n = norm(a);
    return n * n + 0.5 * rho_ * a.squaredNorm();
  }
  Vector gradient(const Vector& a) const override {
    if (p_ == 2.0) return (2.0 + rho_) * a;
    return squared_lp_gradient(a, p_) + rho_ * a;
  }
  Vector inverse_gradient(const Vector& z) const override {
    if (p_ == 2.0) return z / (2.0 + rho_);
    const Index d = z.size();
    if (z.lpNorm<Eigen::Infinity>() == 0.0) return Vector::Zero(d);
    // Given N = |a|_p each |a_i| solves u + (2 N^{2-p}/rho) u^{p-1} = |z_i|/rho.
    const Vector mag = z.cwiseAbs() / rho_;
    Vector u(d);
    auto phi = [&](double n) {
      const double c = 2.0 * std::pow(n, 2.0 - p_) / rho_;
      for (Index i = 0; i < d; ++i) u(i) = solve_shrink(mag(i), c, p_);
      return n - norm(u);
    };
    double lo = 0.0;
    double hi = norm(mag);
    double flo = phi(lo);
    double fhi = phi(hi);
    // Illinois regula falsi keeps the bracket.
    double n = hi;
    int side = 0;
    for (int it = 0; it < 300 && hi - lo > 1e-16 * hi; ++it) {
      n = (lo * fhi - hi * flo) / (fhi - flo);
      if (!(n > lo && n < hi)) n = 0.5 * (lo + hi);
      const double fn = phi(n);
      if (fn == 0.0) break;
      if (fn > 0.0) {
        hi = n;
        fhi = fn;
        if (side == 1) flo *= 0.5;
        side = 1;
      } else {
        lo = n;
        flo = fn;
        if (side == -1) fhi *= 0.5;
        side = -1;
      }
    }
    phi(n);
    Vector a = (z.array().sign() * u.array()).matrix();
    check_inverse(*this, a, z);
    return a;
  }

 private:
  double p_;
  double rho_;
};

// ------------------------------------------------------- generic Moreau

class GenericMoreauModel final : public Potential::Model {
 public:
  GenericMoreauModel(ConvexBody body, double lambda, double rho)
      : body_(std::move(body)), lambda_(lambda), rho_(rho) {}
  double value(const Vector& a) const override {
    return moreau_squared_gauge(body_, lambda_, a).value + 0.5 * rho_ * a.squaredNorm();
  }
  Vector gradient(const Vector& a) const override {
    const MoreauProx prox = moreau_squared_gauge(body_, lambda_, a);
    return (a - prox.point) / lambda_ + rho_ * a;
  }
  Vector inverse_gradient(const Vector& z) const override {
    // Nesterov's constant-momentum method on F(x) = psi(x) - <z, x>, which
    // is (1/lambda + rho)-smooth and rho-strongly convex.
    const double smooth = 1.0 / lambda_ + rho_;
    const double kappa_root = std::sqrt(smooth / rho_);
    const double momentum = (kappa_root - 1.0) / (kappa_root + 1.0);
    const double target = 1e-12 * (1.0 + z.norm());
    Vector x = z / smooth;
    Vector y = x;
    Vector grad_x = gradient(x) - z;
    for (int it = 0; it < 100000 && grad_x.norm() > target; ++it) {
      const Vector next = y - (gradient(y) - z) / smooth;
      y = next + momentum * (next - x);
      x = next;
      grad_x = gradient(x) - z;
    }
    check_inverse(*this, x, z);
    return x;
  }

 private:
  ConvexBody body_;
  double lambda_;
  double rho_;
};

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive and finite");
}

}  // namespace

Potential Potential::with_approximation(double c_l, double c_u) const {
  require_positive(c_l, "c_l");
  require_positive(c_u, "c_u");
  return Potential(std::make_shared<ReconstantedModel>(*this, c_l, c_u));
}

MoreauProx moreau_squared_gauge(const ConvexBody& body, double lambda, const Vector& alpha) {
  const double top = minkowski(body, alpha);
  if (top == 0.0) return {alpha, 0.0, alpha.squaredNorm() / (2.0 * lambda)};
  // The prox lies in tK for the minimizer t of t^2 + dist(alpha, tK)^2/(2 lambda),
  // a convex function of t on [0, phi(alpha)].
  auto point_at = [&](double t) { return Vector(t * project_euclidean(body, alpha / t).coords); };
  auto slope = [&](double t, const Vector& p) { return 2.0 * t - (alpha - p).dot(p) / (lambda * t); };
  double lo = 0.0;
  double hi = top;
  Vector best = alpha;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * top; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vector p = point_at(mid);
    if (slope(mid, p) > 0.0) {
      hi = mid;
      best = p;
    } else {
      lo = mid;
    }
  }
  const double t = hi;
  if (hi < top) best = point_at(t);
  return {best, t, t * t + (alpha - best).squaredNorm() / (2.0 * lambda)};
}

Potential squared_l2(Index d) {
  if (d < 1) throw InvalidArgument("squared_l2: dimension must be >= 1");
  return Potential(std::make_shared<SquaredL2Model>(d));
}

Potential squared_lp(Index d, double p, double c_l, double c_u) {
  if (d < 1) throw InvalidArgument("squared_lp: dimension must be >= 1");
  if (!(p > 1.0 && p <= 2.0)) throw InvalidArgument("squared_lp: p must lie in (1, 2]");
  require_positive(c_l, "c_l");
  require_positive(c_u, "c_u");
  return Potential(std::make_shared<SquaredLpModel>(d, p, c_l, c_u));
}

Potential huber_moreau(Index d, double lambda, double rho) {
  if (d < 1) throw InvalidArgument("huber_moreau: dimension must be >= 1");
  require_positive(lambda, "huber lambda");
  require_positive(rho, "huber rho");
  auto m = std::make_shared<SeparableSquareModel<HuberScalar>>(HuberScalar{lambda},
                                                               0.5 * static_cast<double>(d) * lambda, rho);
  m->kind = PotentialKind::HuberMoreau;
  m->dim = d;
  m->name = "huber_moreau";
  fill_constants(*m, rho, NormTag::l2(), 1.0, std::sqrt(5.0));
  m->caps = {false, true, false};
  m->parameters = {{"lambda", lambda}, {"rho", rho}};
  const double offset = 0.5 * static_cast<double>(d) * lambda;
  m->lower_bound = [offset](const Vector&) { return offset; };
  return Potential(m);
}

Potential adj_hypentropy(Index d, double gamma) {
  if (d < 1) throw InvalidArgument("adj_hypentropy: dimension must be >= 1");
  require_positive(gamma, "hypentropy gamma");
  const double c = 1.0 / std::asinh(1.0 / gamma);
  auto m = std::make_shared<SeparableSquareModel<HypentropyScalar>>(HypentropyScalar{gamma, c}, 0.0, 0.0);
  m->kind = PotentialKind::AdjHypentropy;
  m->dim = d;
  m->name = "adj_hypentropy";
  fill_constants(*m, c * c, NormTag::l2(), 1.0, 3.0);
  m->caps = {true, true, false};
  m->parameters = {{"gamma", gamma}};
  const double floor = static_cast<double>(d) * c;
  m->lower_bound = [floor](const Vector&) { return floor; };
  return Potential(m);
}

Potential sigmoidal(Index d, double gamma) {
  if (d < 1) throw InvalidArgument("sigmoidal: dimension must be >= 1");
  require_positive(gamma, "sigmoidal gamma");
  auto m = std::make_shared<SeparableSquareModel<SigmoidScalar>>(SigmoidScalar{gamma}, 0.0, 0.0);
  m->kind = PotentialKind::Sigmoidal;
  m->dim = d;
  m->name = "sigmoidal";
  // Not strongly convex: continuous time only.
  fill_constants(*m, 0.0, NormTag::l2(), 1.0, 2.0);
  m->caps = {true, false, false};
  m->parameters = {{"gamma", gamma}};
  const double floor = static_cast<double>(d) * 2.0 * std::numbers::ln2 / gamma;
  m->lower_bound = [floor](const Vector& z) {
    return std::max(floor, 0.5 * z.lpNorm<Eigen::Infinity>());
  };
  return Potential(m);
}

Potential log_sum_exp_hull(const Matrix& a, double gamma, double rho) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidArgument("log_sum_exp_hull: empty constraint matrix");
  require_positive(gamma, "log-sum-exp gamma");
  require_positive(rho, "log-sum-exp rho");
  auto m = std::make_shared<LogSumExpHullModel>(a, gamma, rho);
  m->kind = PotentialKind::LogSumExpHull;
  m->dim = a.cols();
  m->name = "log_sum_exp_hull";
  fill_constants(*m, rho, NormTag::l2(), 1.0, 3.0);
  m->caps = {true, true, false};
  m->parameters = {{"gamma", gamma}, {"rho", rho}, {"m", static_cast<double>(a.rows())}};
  return Potential(m);
}

Potential generic_moreau(const ConvexBody& body, double lambda, double rho, double c_l, double c_u) {
  require_positive(lambda, "moreau lambda");
  require_positive(rho, "moreau rho");
  if (!supports_projection(body))
    throw UnsupportedOperation("generic_moreau: the body must support Euclidean projection");
  auto m = std::make_shared<GenericMoreauModel>(body, lambda, rho);
  m->kind = PotentialKind::GenericMoreau;
  m->dim = body.dim();
  m->name = "generic_moreau";
  fill_constants(*m, rho, NormTag::l2(), c_l, c_u);
  m->caps = {false, true, false};
  m->parameters = {{"lambda", lambda}, {"rho", rho}};
  return Potential(m);
}

double min_hypentropy_gamma(Index d, double tau) {
  const double ratio = static_cast<double>(d) / tau;
  // 1/sinh(x) underflows to 0 only for x beyond ~710; keep the exact form.
  const double inv_sinh = ratio > 700.0 ? 2.0 * std::exp(-ratio) : 1.0 / std::sinh(ratio);
  return std::min({inv_sinh, 1.0 / (4.0 * tau), 1.0 / std::sqrt(2.0)});
}

Potential make_standard_potential(StandardPotential name, Index d, double tau, const StandardOverrides& ov) {
  require_positive(tau, "tau");
  if (d < 1) throw InvalidArgument("make_standard_potential: dimension must be >= 1");
  const auto dd = static_cast<double>(d);
  const double slack = 1.0 + 1e-12;
  switch (name) {
    case StandardPotential::SquaredLp: {
      if (d < 2) throw InvalidArgument("squared_lp: d must be >= 2");
      const double p = ov.p.value_or(1.0 + 1.0 / std::log(dd));
      if (ov.enforce_bounds && (std::log(dd) * (p - 1.0) / p > 1.0 * slack || !(p > 1.0)))
        throw InvalidArgument("squared_lp: p too large for c_l = e");
      return squared_lp(d, std::min(p, 2.0), std::numbers::e, 1.0);
    }
    case StandardPotential::HuberMoreau: {
      const double lambda = ov.lambda.value_or(2.0 * tau / dd);
      const double rho = ov.rho.value_or(2.0);
      if (ov.enforce_bounds && (lambda > 2.0 * tau / dd * slack || rho > 2.0 * slack))
        throw InvalidArgument("huber: requires lambda <= 2 tau / d and rho <= 2");
      return huber_moreau(d, lambda, rho);
    }
    case StandardPotential::AdjHypentropy: {
      const double bound = min_hypentropy_gamma(d, tau);
      const double gamma = ov.gamma.value_or(bound);
      if (ov.enforce_bounds && gamma > bound * slack)
        throw InvalidArgument("adj_hypentropy: gamma above the admissible bound");
      return adj_hypentropy(d, gamma);
    }
    case StandardPotential::Sigmoidal: {
      const double bound = dd * std::log(4.0) / tau;
      const double gamma = ov.gamma.value_or(bound);
      if (ov.enforce_bounds && gamma < bound / slack)
        throw InvalidArgument("sigmoidal: gamma below d log 4 / tau");
      return sigmoidal(d, gamma);
    }
  }
  throw InvalidArgument("make_standard_potential: unknown name");
}

std::optional<StandardPotential> parse_standard_potential(const std::string& text) {
  if (text == "squared_lp") return StandardPotential::SquaredLp;
  if (text == "huber" || text == "huber_moreau") return StandardPotential::HuberMoreau;
  if (text == "hypentropy" || text == "adj_hypentropy") return StandardPotential::AdjHypentropy;
  if (text == "sigmoidal") return StandardPotential::Sigmoidal;
  return std::nullopt;
}

std::string to_string(StandardPotential name) {
  switch (name) {
    case StandardPotential::SquaredLp: return "squared_lp";
    case StandardPotential::HuberMoreau: return "huber_moreau";
    case StandardPotential::AdjHypentropy: return "adj_hypentropy";
    case StandardPotential::Sigmoidal: return "sigmoidal";
  }
  return "unknown";
}

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::SquaredL2: return "squared_l2";
    case PotentialKind::SquaredLp: return "squared_lp";
    case PotentialKind::HuberMoreau: return "huber_moreau";
    case PotentialKind::AdjHypentropy: return "adj_hypentropy";
    case PotentialKind::Sigmoidal: return "sigmoidal";
    case PotentialKind::LogSumExpHull: return "log_sum_exp_hull";
    case PotentialKind::SmoothNormPlusRidge: return "smooth_norm";
    case PotentialKind::GenericMoreau: return "generic_moreau";
  }
  return "unknown";
}

Potential make_msconvexhull_potential(const Matrix& a, double tau, double vertices_norm_sq_max) {
  require_positive(tau, "tau");
  require_positive(vertices_norm_sq_max, "vertex norm bound");
  if (a.rows() < a.cols() + 1) throw InvalidArgument("log_sum_exp_hull: need at least d + 1 constraint rows");
  const double gamma = 2.0 * std::log(static_cast<double>(a.rows())) / tau;
  return log_sum_exp_hull(a, gamma, 2.0 / vertices_norm_sq_max);
}

Potential make_smooth_norm_potential(const ConvexBody& body, double c_k) {
  require_positive(c_k, "norm equivalence constant");
  if (body.kind() != ConvexBody::Kind::LpBall || !(body.p() > 1.0 && body.p() <= 2.0))
    throw UnsupportedOperation("smooth norm potential: supported for l_p balls with p in (1, 2]");
  const double rho = 2.0 / (c_k * c_k);
  auto m = std::make_shared<SmoothNormModel>(body.dim(), body.p(), rho);
  fill_constants(*m, rho, NormTag::l2(), 1.0, std::sqrt(2.0));
  m->caps = {false, true, body.p() == 2.0};
  m->parameters = {{"p", body.p()}, {"rho", rho}, {"c_k", c_k}};
  return Potential(m);
}

}  // namespace esmd
