#include "esmd/width.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "esmd/lse.hpp"
#include "esmd/parallel.hpp"
#include "esmd/stats.hpp"

namespace esmd {

namespace {

Vector draw_xi(RngStream rng, Index n) {
  Vector xi(n);
  for (Index i = 0; i < n; ++i) xi(i) = rng.gaussian();
  return xi;
}

WidthEstimate summarize(const std::vector<double>& values, const std::vector<double>& gaps, std::size_t flagged) {
  WidthEstimate est;
  est.n_samples = values.size();
  est.mean = mean(values);
  est.std_error = sample_sd(values) / std::sqrt(static_cast<double>(values.size()));
  est.per_sample_solver_gap_max = gaps.empty() ? 0.0 : *std::max_element(gaps.begin(), gaps.end());
  est.flagged = flagged;
  return est;
}

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

}  // namespace

WidthEstimate gaussian_width_mc(const DesignMatrix& x, const ConvexBody& body, double tau, std::size_t n_samples,
                                RngStream rng, const std::optional<Vector>& center, unsigned threads) {
  if (n_samples < 30) throw InvalidArgument("gaussian_width_mc: need at least 30 samples");
  if (!(tau >= 0.0)) throw InvalidArgument("gaussian_width_mc: tau must be non-negative");
  if (body.dim() != x.cols()) throw InvalidArgument("gaussian_width_mc: body dimension mismatch");
  const Matrix& m = x.matrix();
  const Vector shift = center ? Vector(m * *center) : Vector(Vector::Zero(x.rows()));
  std::vector<double> values(n_samples);
  parallel_for(n_samples, threads, [&](std::size_t i) {
    const Vector xi = draw_xi(rng.fork(i), x.rows());
    const double top = tau == 0.0 ? 0.0 : tau * support(body, m.transpose() * xi);
    values[i] = top - xi.dot(shift);
  });
  return summarize(values, {}, 0);
}

struct LocalizedWidthSampler::Impl {
  struct Sample {
    Vector xi;
    Vector warm;      // last inner least-squares solution (inside tau K)
    double mu = 0.0;  // last multiplier on the ball constraint
  };

  DesignMatrix design;
  ConvexBody body;
  double tau;
  Vector truth;
  Vector x_truth;
  ConvexBody scaled;
  RngStream rng;
  WidthOptions options;
  std::vector<Sample> samples;
  std::vector<double> values;

  Impl(const DesignMatrix& x, const ConvexBody& b, double t, const Vector& a, RngStream r, WidthOptions o)
      : design(x), body(b), tau(t), truth(a), x_truth(x.matrix() * a), scaled(scale(b, t)), rng(r), options(o) {}

  void grow(std::size_t n) {
    while (samples.size() < n) {
      Sample s;
      s.xi = draw_xi(rng.fork(samples.size()), design.rows());
      s.warm = truth;
      samples.push_back(std::move(s));
    }
  }

  // Value of one sample at radius r, with its certified gap.
  std::pair<double, double> solve(Sample& s, double r) const {
    const Matrix& m = design.matrix();
    const Vector vertex = lmo(scaled, m.transpose() * s.xi).coords;
    const Vector top = m * vertex - x_truth;
    if (top.norm() <= r) return {s.xi.dot(top), 0.0};

    // Ball constraint active: theta(mu) = P(xi / mu) onto the recentered
    // image, and |theta(mu)| decreases from |top| to 0 as mu grows.
    const double n = static_cast<double>(design.rows());
    const double tol = options.inner_tol;
    Bounds best;
    auto evaluate = [&](double mu) {
      LseOptions opts;
      opts.tol = std::max(0.25 * tol / (mu * n), 1e-15);
      opts.start = s.warm;
      opts.max_iters = 20000;
      const Vector target = x_truth + s.xi / mu;
      LseSolution sol;
      try {
        sol = solve_constrained_ls(design, target, body, tau, opts);
      } catch (const LsePartialResult& partial) {
        sol = partial.partial();
      }
      s.warm = sol.alpha;
      const Vector theta = sol.predictions - x_truth;
      const double norm = theta.norm();
      const double lin = s.xi.dot(theta);
      const double lower = norm > r ? lin * r / norm : lin;
      const double upper = lin - 0.5 * mu * norm * norm + 0.5 * mu * n * sol.fw_gap + 0.5 * mu * r * r;
      best.lower = std::max(best.lower, lower);
      best.upper = std::min(best.upper, upper);
      return norm;
    };
    auto done = [&] { return best.upper - best.lower <= tol; };

    // Bracket: |theta| <= |xi| / mu since projection onto a set holding 0 is
    // non-expansive, so mu = |xi| / r always lands inside the ball.
    double mu_in = s.xi.norm() / r;
    double mu_out = s.mu > 0.0 && s.mu < mu_in ? s.mu : 0.5 * mu_in;
    double norm_in = evaluate(mu_in);
    double norm_out = evaluate(mu_out);
    for (int k = 0; k < 60 && norm_out <= r && !done(); ++k) {
      mu_in = mu_out;
      norm_in = norm_out;
      mu_out *= 0.5;
      norm_out = evaluate(mu_out);
    }
    // Illinois regula falsi on 1/|theta| - 1/r, which is close to linear in mu.
    auto h = [r](double norm) { return norm > 0.0 ? 1.0 / norm - 1.0 / r : std::numeric_limits<double>::max(); };
    double h_in = h(norm_in);
    double h_out = h(norm_out);
    int side = 0;
    for (int k = 0; k < 100 && !done() && norm_out > r; ++k) {
      double mu = mu_out - h_out * (mu_in - mu_out) / (h_in - h_out);
      if (!(mu > mu_out && mu < mu_in)) mu = 0.5 * (mu_in + mu_out);
      const double norm = evaluate(mu);
      const double hm = h(norm);
      if (norm > r) {
        mu_out = mu;
        h_out = hm;
        if (side == -1) h_in *= 0.5;
        side = -1;
      } else {
        mu_in = mu;
        h_in = hm;
        if (side == 1) h_out *= 0.5;
        side = 1;
      }
      s.mu = mu;
    }
    const double lower = std::max(best.lower, 0.0);  // 0 is always feasible
    const double upper = std::max(std::min(best.upper, r * s.xi.norm()), lower);
    return {0.5 * (lower + upper), upper - lower};
  }
};

LocalizedWidthSampler::LocalizedWidthSampler(const DesignMatrix& x, const ConvexBody& body, double tau,
                                             const Vector& truth, RngStream rng, WidthOptions options) {
  if (body.dim() != x.cols()) throw InvalidArgument("localized width: body dimension mismatch");
  require_length(truth, x.cols(), "localized width center");
  if (!(tau > 0.0)) throw InvalidArgument("localized width: tau must be positive");
  if (!(options.inner_tol > 0.0)) throw InvalidArgument("localized width: inner_tol must be positive");
  if (!membership(scale(body, tau), truth, 1e-9)) throw InvalidArgument("localized width: center outside tau K");
  impl_ = std::make_unique<Impl>(x, body, tau, truth, rng, options);
}

LocalizedWidthSampler::~LocalizedWidthSampler() = default;
LocalizedWidthSampler::LocalizedWidthSampler(LocalizedWidthSampler&&) noexcept = default;
LocalizedWidthSampler& LocalizedWidthSampler::operator=(LocalizedWidthSampler&&) noexcept = default;

WidthEstimate LocalizedWidthSampler::estimate(double r, std::size_t n_samples) {
  if (!(r > 0.0)) throw InvalidArgument("localized width: r must be positive");
  if (n_samples < 2) throw InvalidArgument("localized width: need at least two samples");
  Impl& im = *impl_;
  im.grow(n_samples);
  std::vector<double> values(n_samples);
  std::vector<double> gaps(n_samples);
  parallel_for(n_samples, im.options.threads, [&](std::size_t i) {
    const auto [value, gap] = im.solve(im.samples[i], r);
    values[i] = value;
    gaps[i] = gap;
  });
  const auto flagged = static_cast<std::size_t>(
      std::count_if(gaps.begin(), gaps.end(), [&](double g) { return g > im.options.inner_tol; }));
  im.values = values;
  return summarize(values, gaps, flagged);
}

const std::vector<double>& LocalizedWidthSampler::last_values() const { return impl_->values; }
const WidthOptions& LocalizedWidthSampler::options() const { return impl_->options; }

WidthEstimate localized_width_mc(const DesignMatrix& x, const ConvexBody& body, double tau, const Vector& truth,
                                 double r, std::size_t n_samples, RngStream rng, double inner_tol) {
  WidthOptions opts;
  opts.inner_tol = inner_tol;
  LocalizedWidthSampler sampler(x, body, tau, truth, rng, opts);
  return sampler.estimate(r, n_samples);
}

CriticalRadius critical_radius(const DesignMatrix& x, const ConvexBody& body, double tau, const Vector& truth,
                               double tol, std::size_t n_samples, RngStream rng, const WidthOptions& options) {
  if (!(tol > 0.0)) throw InvalidArgument("critical_radius: tol must be positive");
  CriticalRadius out;
  out.tolerance = tol;
  out.full_width = gaussian_width_mc(x, body, tau, std::max<std::size_t>(n_samples, 30), rng, truth,
                                     options.threads);
  const double rank = static_cast<double>(x.rank());
  const double width_cap_sq = std::max(0.0, 2.0 * out.full_width.mean + 8.0 * out.full_width.std_error);
  double hi = std::min(std::sqrt(width_cap_sq), 2.0 * std::sqrt(rank));
  // The caps bound r^2, so the rounded root must not square above them.
  while (hi > 0.0 && (hi * hi > width_cap_sq || hi * hi > 4.0 * rank)) hi = std::nextafter(hi, 0.0);
  double lo = 0.0;
  if (rank == 0.0 || hi <= 1e-12) {
    out.degenerate = true;
    return out;
  }
  LocalizedWidthSampler sampler(x, body, tau, truth, rng, options);
  std::size_t used = n_samples;
  // Sign of the excess width at r: -1 (below r^2/2), +1 (above), 0 if the
  // band stays inconclusive at the largest sample count.
  auto decide = [&](double r) {
    for (std::size_t count = n_samples;; count *= 2) {
      const WidthEstimate est = sampler.estimate(r, count);
      used = std::max(used, count);
      const double excess = est.mean - 0.5 * r * r;
      const double band = options.band_sigmas * est.std_error + est.per_sample_solver_gap_max;
      if (excess <= -band) return -1;
      if (excess >= band) return 1;
      if (count >= n_samples * options.max_expansion) return 0;
    }
  };
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const int sign = decide(mid);
    if (sign < 0) {
      hi = mid;
    } else if (sign > 0) {
      lo = mid;
    } else {
      // The crossing sits inside the noise band around mid: certify a
      // bracket of width tol around it instead.
      const double half = 0.5 * tol * (1.0 - 1e-9);
      const double left = std::max(lo, mid - half);
      const double right = std::min(hi, mid + half);
      const int right_sign = right < hi ? decide(right) : 0;
      const int left_sign = left > lo ? decide(left) : 0;
      // Keep whichever edges certified; when only one did, the bracket still
      // shrinks and bisection resumes around the new midpoint.
      const double width = hi - lo;
      if (right_sign < 0) hi = right;
      if (left_sign > 0) lo = left;
      if (right_sign > 0) lo = right;
      if (left_sign < 0) hi = left;
      if (!(hi - lo < width))
        throw IndeterminateError("critical_radius: Monte Carlo band did not resolve", lo, hi);
    }
  }
  out.lo = lo;
  out.hi = hi;
  out.r_star = hi;
  out.width_at_r = sampler.estimate(hi, n_samples);
  out.n_samples_used = used;
  return out;
}

ScalingReport scaling_check(const DesignMatrix& x, const ConvexBody& body, double tau, std::size_t centers,
                            RngStream rng, std::size_t n_samples, double rel_tol, WidthOptions options) {
  if (!(tau >= 1.0)) throw InvalidArgument("scaling_check: tau must be >= 1");
  if (centers < 1) throw InvalidArgument("scaling_check: need at least one center");
  // Both sides see the same draws, on which the comparison is an identity
  // between sample means; a zero band keeps the two bisections aligned.
  options.band_sigmas = 0.0;
  ScalingReport report;
  const Index d = body.dim();
  for (std::size_t k = 0; k < centers; ++k) {
    RngStream local = rng.fork(k);
    RngStream draw = local.fork(0);
    const Vector center = sample_boundary(body, draw) * std::pow(draw.uniform(), 1.0 / static_cast<double>(d));
    const RngStream noise = local.fork(1);
    const double scale_hint = std::sqrt(2.0 * std::max(gaussian_width_mc(x, body, 1.0, n_samples, noise,
                                                                          center).mean, 1e-12));
    const CriticalRadius base =
        critical_radius(x, body, 1.0, center, rel_tol * scale_hint, n_samples, noise, options);
    const CriticalRadius wide = critical_radius(x, body, tau, Vector(tau * center),
                                                rel_tol * std::sqrt(tau) * scale_hint, n_samples, noise, options);
    if (base.degenerate || base.r_star == 0.0) continue;
    const double ratio = wide.r_star * wide.r_star / (tau * base.r_star * base.r_star);
    report.ratios.push_back(ratio);
    report.worst_ratio = std::max(report.worst_ratio, ratio);
  }
  return report;
}

}  // namespace esmd
