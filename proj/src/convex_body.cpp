#include "esmd/convex_body.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

#include "esmd/simplex_lp.hpp"

namespace esmd {

namespace {

struct LpBallRep {
  double p;
};
struct HRep {
  Matrix a;
  bool balanced;
};
struct VRep {
  Matrix v;
};
struct ScaledRep {
  ConvexBody inner;
  double tau;
};
struct TranslatedRep {
  ConvexBody inner;
  Vector shift;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

double lp_norm(const Vector& v, double p) {
  const double scale = v.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return 0.0;
  if (std::isinf(p)) return scale;
  if (p == 1.0) return v.lpNorm<1>();
  if (p == 2.0) return v.norm();
  return scale * std::pow((v.array().abs() / scale).pow(p).sum(), 1.0 / p);
}

// Support function of conv(V) restricted: phi_V(alpha) = min 1'mu s.t.
// V'mu = alpha, mu >= 0; +inf when alpha is outside the cone of V.
double vrep_gauge(const Matrix& v, const Vector& alpha) {
  if (alpha.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
  const LpResult res = solve_standard_lp(Vector::Ones(v.rows()), v.transpose(), alpha);
  if (res.status != LpResult::Status::Optimal) return kInf;
  return res.objective;
}

Vector lp_ball_lmo(const Vector& c, double p) {
  const Index d = c.size();
  Vector out = Vector::Zero(d);
  if (p == 1.0) {
    Index best = 0;
    c.cwiseAbs().maxCoeff(&best);
    out(best) = c(best) >= 0.0 ? 1.0 : -1.0;
    return out;
  }
  if (std::isinf(p)) {
    for (Index i = 0; i < d; ++i) out(i) = c(i) > 0.0 ? 1.0 : (c(i) < 0.0 ? -1.0 : 0.0);
    return out;
  }
  if (p == 2.0) return c / c.norm();
  const double q = p / (p - 1.0);
  const double scale = c.lpNorm<Eigen::Infinity>();
  for (Index i = 0; i < d; ++i) {
    const double r = std::abs(c(i)) / scale;
    out(i) = (c(i) >= 0.0 ? 1.0 : -1.0) * std::pow(r, q - 1.0);
  }
  return out / lp_norm(out, p);
}

Vector project_l1(const Vector& y) {
  if (y.lpNorm<1>() <= 1.0) return y;
  std::vector<double> a(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(y(i));
  std::sort(a.begin(), a.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    cumulative += a[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (k + 1 == a.size() || t >= a[k + 1]) {
      theta = t;
      break;
    }
  }
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double m = std::max(std::abs(y(i)) - theta, 0.0);
    out(i) = y(i) >= 0.0 ? m : -m;
  }
  return out;
}

Vector project_lp(const Vector& y, double p) {
  if (lp_norm(y, p) <= 1.0) return y;
  const Vector a = y.cwiseAbs();
  // h(c) = sum u_i(c)^p - 1 is decreasing in the multiplier c = mu p.
  auto evaluate = [&](double c, Vector& u, double& slope) {
    double total = 0.0;
    slope = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
      const double ui = solve_shrink(a(i), c, p);
      u(i) = ui;
      if (ui <= 0.0) continue;
      const double upm1 = std::pow(ui, p - 1.0);
      total += upm1 * ui;
      const double du = -ui / (std::pow(ui, 2.0 - p) + c * (p - 1.0));
      slope += p * upm1 * du;
    }
    return total - 1.0;
  };
  Vector u(a.size());
  double slope = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (evaluate(hi, u, slope) > 0.0) {
    lo = hi;
    hi *= 4.0;
    if (hi > 1e300) throw ConvergenceError("lp projection multiplier bracket", hi);
  }
  double c = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double h = evaluate(c, u, slope);
    if (h > 0.0) lo = c; else hi = c;
    if (std::abs(h) <= 1e-15 || hi - lo <= 1e-16 * hi) break;
    double next = slope < 0.0 ? c - h / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    c = next;
  }
  Vector out(y.size());
  for (Index i = 0; i < y.size(); ++i) out(i) = y(i) >= 0.0 ? u(i) : -u(i);
  const double nrm = lp_norm(out, p);
  if (nrm > 1.0) out /= nrm;
  return out;
}

}  // namespace

struct ConvexBody::Node {
  Index dim;
  std::variant<LpBallRep, HRep, VRep, ScaledRep, TranslatedRep> rep;
};

ConvexBody ConvexBody::lp_ball(Index d, double p) {
  if (d < 1) throw InvalidArgument("lp_ball: dimension must be >= 1");
  if (!(p >= 1.0)) throw InvalidArgument("lp_ball: p must lie in [1, inf]");
  return ConvexBody(std::make_shared<const Node>(Node{d, LpBallRep{p}}));
}

ConvexBody ConvexBody::polytope_h(Matrix a) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidArgument("polytope_h: empty constraint matrix");
  if (!a.allFinite()) throw InvalidArgument("polytope_h: non-finite constraint");
  const Index d = a.cols();
  // Bounded iff every +-e_i lies in the cone of the rows.
  for (Index i = 0; i < d; ++i) {
    for (const double s : {1.0, -1.0}) {
      Vector c = Vector::Zero(d);
      c(i) = s;
      const LpResult res = solve_standard_lp(Vector::Ones(a.rows()), a.transpose(), c);
      if (res.status != LpResult::Status::Optimal) throw InvalidArgument("polytope_h: body is unbounded");
    }
  }
  const bool balanced = a.colwise().sum().lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + a.cwiseAbs().sum());
  return ConvexBody(std::make_shared<const Node>(Node{d, HRep{std::move(a), balanced}}));
}

ConvexBody ConvexBody::polytope_v(Matrix vertices, bool assume_interior) {
  const Index d = vertices.cols();
  if (vertices.rows() < 1 || d < 1) throw InvalidArgument("polytope_v: empty vertex list");
  if (d > 10 || vertices.rows() > 64) throw InvalidArgument("polytope_v: supported up to d = 10 and 64 vertices");
  if (!vertices.allFinite()) throw InvalidArgument("polytope_v: non-finite vertex");
  if (!assume_interior) {
    for (Index i = 0; i < d; ++i) {
      for (const double s : {1.0, -1.0}) {
        Vector e = Vector::Zero(d);
        e(i) = s;
        if (!std::isfinite(vrep_gauge(vertices, e)))
          throw InvalidArgument("polytope_v: origin is not interior to the hull");
      }
    }
  }
  return ConvexBody(std::make_shared<const Node>(Node{d, VRep{std::move(vertices)}}));
}

ConvexBody::Kind ConvexBody::kind() const noexcept { return static_cast<Kind>(node_->rep.index()); }
Index ConvexBody::dim() const noexcept { return node_->dim; }

double ConvexBody::p() const {
  if (const auto* r = std::get_if<LpBallRep>(&node_->rep)) return r->p;
  throw InvalidArgument("p(): not an l_p ball");
}
const Matrix& ConvexBody::constraints() const {
  if (const auto* r = std::get_if<HRep>(&node_->rep)) return r->a;
  throw InvalidArgument("constraints(): not an H-representation");
}
const Matrix& ConvexBody::vertices() const {
  if (const auto* r = std::get_if<VRep>(&node_->rep)) return r->v;
  throw InvalidArgument("vertices(): not a V-representation");
}
const ConvexBody& ConvexBody::inner() const {
  if (const auto* r = std::get_if<ScaledRep>(&node_->rep)) return r->inner;
  if (const auto* r = std::get_if<TranslatedRep>(&node_->rep)) return r->inner;
  throw InvalidArgument("inner(): not a derived body");
}
double ConvexBody::factor() const {
  if (const auto* r = std::get_if<ScaledRep>(&node_->rep)) return r->tau;
  throw InvalidArgument("factor(): not a scaled body");
}
const Vector& ConvexBody::shift() const {
  if (const auto* r = std::get_if<TranslatedRep>(&node_->rep)) return r->shift;
  throw InvalidArgument("shift(): not a translated body");
}
bool ConvexBody::rows_balanced() const {
  if (const auto* r = std::get_if<HRep>(&node_->rep)) return r->balanced;
  throw InvalidArgument("rows_balanced(): not an H-representation");
}

ConvexBody scale(const ConvexBody& body, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("scale: factor must be positive and finite");
  return ConvexBody(std::make_shared<const ConvexBody::Node>(ConvexBody::Node{body.dim(), ScaledRep{body, tau}}));
}

ConvexBody translate(const ConvexBody& body, const Vector& shift) {
  require_length(shift, body.dim(), "translate");
  if (!(minkowski(body, -shift) < 1.0))
    throw InvalidArgument("translate: origin would leave the interior");
  return ConvexBody(
      std::make_shared<const ConvexBody::Node>(ConvexBody::Node{body.dim(), TranslatedRep{body, shift}}));
}

double minkowski(const ConvexBody& body, const Vector& alpha) {
  require_length(alpha, body.dim(), "minkowski");
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall:
      return lp_norm(alpha, body.p());
    case ConvexBody::Kind::PolytopeH:
      return std::max(0.0, (body.constraints() * alpha).maxCoeff());
    case ConvexBody::Kind::PolytopeV:
      return vrep_gauge(body.vertices(), alpha);
    case ConvexBody::Kind::Scaled:
      return minkowski(body.inner(), alpha) / body.factor();
    case ConvexBody::Kind::Translated: {
      // alpha in t(K + v) iff phi_K(alpha - t v) <= t; monotone in t.
      if (alpha.lpNorm<Eigen::Infinity>() == 0.0) return 0.0;
      const ConvexBody& inner = body.inner();
      const Vector& v = body.shift();
      auto inside = [&](double t) { return minkowski(inner, alpha - t * v) <= t; };
      double lo = 0.0;
      double hi = 1.0;
      while (!inside(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return kInf;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-10 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (inside(mid)) hi = mid; else lo = mid;
      }
      return hi;
    }
  }
  throw Error("minkowski: unknown body kind");
}

BodyPoint lmo(const ConvexBody& body, const Vector& direction) {
  require_length(direction, body.dim(), "lmo");
  if (!direction.allFinite()) throw InvalidArgument("lmo: direction must be finite");
  const bool zero = direction.lpNorm<Eigen::Infinity>() == 0.0;
  BodyPoint out;
  out.zero_direction = zero;
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall:
      out.coords = zero ? Vector(Vector::Zero(body.dim())) : lp_ball_lmo(direction, body.p());
      out.certificate = zero ? 0.0 : 1.0;
      return out;
    case ConvexBody::Kind::PolytopeV: {
      Index best = 0;
      (body.vertices() * direction).maxCoeff(&best);
      out.coords = body.vertices().row(best).transpose();
      return out;
    }
    case ConvexBody::Kind::PolytopeH: {
      const Matrix& a = body.constraints();
      if (zero) {
        out.coords = Vector::Zero(body.dim());
        out.certificate = 0.0;
        return out;
      }
      // Dual LP: min 1'y s.t. A'y = c, y >= 0; its multipliers are the maximizer.
      const LpResult res = solve_standard_lp(Vector::Ones(a.rows()), a.transpose(), direction);
      if (res.status != LpResult::Status::Optimal) throw Error("lmo: H-polytope is unbounded");
      Vector alpha = res.duals;
      const double worst = (a * alpha).maxCoeff();
      if (worst > 1.0) alpha /= worst;
      const double gap = std::abs(res.objective - direction.dot(alpha));
      if (gap > 1e-8 * (1.0 + std::abs(res.objective)))
        throw ConvergenceError("lmo: H-polytope duality gap", gap);
      out.coords = std::move(alpha);
      return out;
    }
    case ConvexBody::Kind::Scaled: {
      BodyPoint in = lmo(body.inner(), direction);
      out.coords = body.factor() * in.coords;
      if (in.certificate) out.certificate = *in.certificate;
      return out;
    }
    case ConvexBody::Kind::Translated: {
      BodyPoint in = lmo(body.inner(), direction);
      out.coords = in.coords + body.shift();
      return out;
    }
  }
  throw Error("lmo: unknown body kind");
}

double support(const ConvexBody& body, const Vector& direction) {
  return direction.dot(lmo(body, direction).coords);
}

bool membership(const ConvexBody& body, const Vector& alpha, double tol) {
  return minkowski(body, alpha) <= 1.0 + tol;
}

bool supports_projection(const ConvexBody& body) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall:
      return true;
    case ConvexBody::Kind::Scaled:
    case ConvexBody::Kind::Translated:
      return supports_projection(body.inner());
    default:
      return false;
  }
}

BodyPoint project_euclidean(const ConvexBody& body, const Vector& point) {
  require_length(point, body.dim(), "project_euclidean");
  BodyPoint out;
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall: {
      const double p = body.p();
      if (p == 2.0) {
        const double nrm = point.norm();
        out.coords = nrm > 1.0 ? Vector(point / nrm) : point;
      } else if (p == 1.0) {
        out.coords = project_l1(point);
      } else if (std::isinf(p)) {
        out.coords = point.cwiseMax(-1.0).cwiseMin(1.0);
      } else {
        out.coords = project_lp(point, p);
      }
      out.certificate = lp_norm(out.coords, p);
      return out;
    }
    case ConvexBody::Kind::Scaled: {
      const double tau = body.factor();
      BodyPoint in = project_euclidean(body.inner(), point / tau);
      out.coords = tau * in.coords;
      if (in.certificate) out.certificate = *in.certificate;
      return out;
    }
    case ConvexBody::Kind::Translated: {
      BodyPoint in = project_euclidean(body.inner(), point - body.shift());
      out.coords = in.coords + body.shift();
      return out;
    }
    default:
      throw UnsupportedOperation("project_euclidean: polytopes expose only linear oracles");
  }
}

bool has_atoms(const ConvexBody& body) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall:
      return body.p() == 1.0;
    case ConvexBody::Kind::PolytopeV:
      return true;
    case ConvexBody::Kind::Scaled:
    case ConvexBody::Kind::Translated:
      return has_atoms(body.inner());
    default:
      return false;
  }
}

Index atom_count(const ConvexBody& body) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall:
      return 2 * body.dim();
    case ConvexBody::Kind::PolytopeV:
      return body.vertices().rows();
    case ConvexBody::Kind::Scaled:
    case ConvexBody::Kind::Translated:
      return atom_count(body.inner());
    default:
      throw UnsupportedOperation("atom_count: body has no atom list");
  }
}

// l1 atoms: index 2j is +e_j, 2j+1 is -e_j.
Vector atom(const ConvexBody& body, Index index) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall: {
      Vector e = Vector::Zero(body.dim());
      e(index / 2) = index % 2 == 0 ? 1.0 : -1.0;
      return e;
    }
    case ConvexBody::Kind::PolytopeV:
      return body.vertices().row(index).transpose();
    case ConvexBody::Kind::Scaled:
      return body.factor() * atom(body.inner(), index);
    case ConvexBody::Kind::Translated:
      return atom(body.inner(), index) + body.shift();
    default:
      throw UnsupportedOperation("atom: body has no atom list");
  }
}

Index best_atom(const ConvexBody& body, const Vector& direction) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall: {
      Index j = 0;
      direction.cwiseAbs().maxCoeff(&j);
      return direction(j) >= 0.0 ? 2 * j : 2 * j + 1;
    }
    case ConvexBody::Kind::PolytopeV: {
      Index i = 0;
      (body.vertices() * direction).maxCoeff(&i);
      return i;
    }
    case ConvexBody::Kind::Scaled:
    case ConvexBody::Kind::Translated:
      return best_atom(body.inner(), direction);
    default:
      throw UnsupportedOperation("best_atom: body has no atom list");
  }
}

double max_squared_norm(const ConvexBody& body, RngStream rng) {
  switch (body.kind()) {
    case ConvexBody::Kind::LpBall: {
      const double p = body.p();
      const auto d = static_cast<double>(body.dim());
      if (p <= 2.0) return 1.0;
      return std::isinf(p) ? d : std::pow(d, 1.0 - 2.0 / p);
    }
    case ConvexBody::Kind::PolytopeV:
      return body.vertices().rowwise().squaredNorm().maxCoeff();
    case ConvexBody::Kind::Scaled:
      return body.factor() * body.factor() * max_squared_norm(body.inner(), rng);
    default: {
      const Index d = body.dim();
      double best = 0.0;
      auto probe = [&](const Vector& c) {
        const Vector x = lmo(body, c).coords;
        best = std::max(best, x.squaredNorm());
        // One ascent pass of |x|^2 along its own direction.
        best = std::max(best, lmo(body, x).coords.squaredNorm());
      };
      for (Index i = 0; i < d; ++i) {
        Vector e = Vector::Zero(d);
        e(i) = 1.0;
        probe(e);
        probe(-e);
      }
      for (Index k = 0; k < 2 * d; ++k) {
        Vector c(d);
        for (Index i = 0; i < d; ++i) c(i) = rng.gaussian();
        probe(c);
      }
      return 1.05 * best;
    }
  }
}

double solve_shrink(double a, double c, double p) {
  if (a <= 0.0) return 0.0;
  if (c <= 0.0) return a;
  if (p == 2.0) return a / (1.0 + c);
  if (p < 2.0) {
    // w = u^{p-1}: G(w) = w^r + c w - a is convex increasing, so Newton from
    // the right converges monotonically.
    const double r = 1.0 / (p - 1.0);
    double w = std::min(a / c, std::pow(a, p - 1.0));
    for (int it = 0; it < 200; ++it) {
      const double wr = std::pow(w, r);
      const double g = wr + c * w - a;
      if (g <= 0.0) break;
      const double step = g / (r * wr / w + c);
      w -= step;
      if (step <= 1e-16 * w) break;
    }
    return std::min(a, std::pow(std::max(w, 0.0), r));
  }
  double u = std::min(a, std::pow(a / c, 1.0 / (p - 1.0)));
  for (int it = 0; it < 200; ++it) {
    const double upm2 = std::pow(u, p - 2.0);
    const double f = u + c * upm2 * u - a;
    if (f <= 0.0) break;
    const double step = f / (1.0 + c * (p - 1.0) * upm2);
    u -= step;
    if (step <= 1e-16 * u) break;
  }
  return std::max(u, 0.0);
}

Vector sample_boundary(const ConvexBody& body, RngStream& rng) {
  Vector v(body.dim());
  double g = 0.0;
  do {
    for (Index i = 0; i < v.size(); ++i) v(i) = rng.gaussian();
    g = minkowski(body, v);
  } while (!(g > 0.0) || !std::isfinite(g));
  return v / g;
}

}  // namespace esmd
