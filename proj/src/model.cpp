#include "esmd/model.hpp"

#include <cmath>
#include <mutex>
#include <string>

namespace esmd {

void require_length(const Vector& v, Index expected, const char* what) {
  if (v.size() != expected) {
    throw InvalidArgument(std::string(what) + ": expected length " + std::to_string(expected) +
                          ", got " + std::to_string(v.size()));
  }
}

double norm_in(const NormTag& tag, const Vector& v) {
  switch (tag.kind) {
    case NormTag::Kind::L2:
      return v.norm();
    case NormTag::Kind::L1:
      return v.lpNorm<1>();
    case NormTag::Kind::Lp: {
      if (std::isinf(tag.p)) return v.lpNorm<Eigen::Infinity>();
      const double scale = v.lpNorm<Eigen::Infinity>();
      if (scale == 0.0) return 0.0;
      return scale * std::pow((v.array().abs() / scale).pow(tag.p).sum(), 1.0 / tag.p);
    }
  }
  throw InvalidArgument("unknown norm tag");
}

struct DesignMatrix::Cache {
  std::once_flag svd_once;
  double sigma_max = 0.0;
  int rank = 0;

  void compute(const Matrix& entries) {
    std::call_once(svd_once, [this, &entries] {
      const Eigen::BDCSVD<Matrix> svd(entries);
      const Vector& s = svd.singularValues();
      sigma_max = s.size() > 0 ? s(0) : 0.0;
      const double threshold = 1e-10 * sigma_max;
      rank = 0;
      if (sigma_max > 0.0) {
        for (Index i = 0; i < s.size(); ++i) rank += s(i) > threshold ? 1 : 0;
      }
    });
  }
};

DesignMatrix::DesignMatrix(Matrix entries, bool degenerate_size)
    : cache_(std::make_shared<Cache>()), degenerate_size_(degenerate_size) {
  if (entries.rows() < 1 || entries.cols() < 1) throw InvalidArgument("design must be at least 1x1");
  if (!entries.allFinite()) throw InvalidArgument("design entries must be finite");
  entries_ = std::make_shared<const Matrix>(std::move(entries));
}

double DesignMatrix::spectral_norm() const {
  cache_->compute(*entries_);
  return cache_->sigma_max;
}

int DesignMatrix::rank() const {
  cache_->compute(*entries_);
  return cache_->rank;
}

RegressionInstance make_instance(DesignMatrix design, Vector y, std::optional<Vector> ground_truth) {
  require_length(y, design.rows(), "response");
  if (ground_truth) require_length(*ground_truth, design.cols(), "ground truth");
  return RegressionInstance{std::move(design), std::move(y), std::move(ground_truth)};
}

double empirical_risk(const RegressionInstance& instance, const Vector& alpha) {
  require_length(alpha, instance.d(), "empirical_risk");
  return empirical_risk(instance.design.matrix(), alpha, instance.y);
}

Vector empirical_risk_gradient(const RegressionInstance& instance, const Vector& alpha) {
  require_length(alpha, instance.d(), "empirical_risk_gradient");
  return empirical_risk_gradient(instance.design.matrix(), alpha, instance.y);
}

double in_sample_risk(const DesignMatrix& design, const Vector& alpha, const Vector& truth) {
  require_length(alpha, design.cols(), "in_sample_risk");
  require_length(truth, design.cols(), "in_sample_risk truth");
  return (design.matrix() * (alpha - truth)).squaredNorm() / static_cast<double>(design.rows());
}

Vector draw_noise(RngStream rng, Index n, double sd) {
  Vector xi(n);
  for (Index i = 0; i < n; ++i) xi(i) = sd * rng.gaussian();
  return xi;
}

RegressionInstance sample_instance(const DesignMatrix& design, const Vector& truth, RngStream rng,
                                   double noise_sd) {
  require_length(truth, design.cols(), "sample_instance");
  if (!(noise_sd >= 0.0)) throw InvalidArgument("noise standard deviation must be >= 0");
  RegressionInstance inst{design, design.matrix() * truth + draw_noise(rng.restarted(), design.rows(), noise_sd),
                          truth};
  inst.noise_seed = rng.seed();
  inst.noise_stream = rng.stream_id();
  inst.noise_sd = noise_sd;
  return inst;
}

Vector reconstruct_noise(const RegressionInstance& instance) {
  return draw_noise(RngStream(instance.noise_seed, instance.noise_stream), instance.n(), instance.noise_sd);
}

DesignMatrix sample_gaussian_design(Index n, Index d, RngStream rng) {
  if (n < 1 || d < 1) throw InvalidArgument("design dimensions must be >= 1");
  Matrix x(n, d);
  // Row-major fill order.
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = rng.gaussian();
  return DesignMatrix(std::move(x));
}

int matrix_rank(const DesignMatrix& design) { return design.rank(); }

double smoothness_constant(const DesignMatrix& design, const NormTag& norm) {
  const double sigma = design.spectral_norm();
  const double base = 2.0 * sigma * sigma / static_cast<double>(design.rows());
  const auto d = static_cast<double>(design.cols());
  // Quadratic form bound: |v|_2^2 <= c |v|^2 in the requested norm.
  switch (norm.kind) {
    case NormTag::Kind::L2:
      return base;
    case NormTag::Kind::L1:
      return base;
    case NormTag::Kind::Lp:
      if (!(norm.p >= 1.0)) throw InvalidArgument("lp norm tag requires p >= 1");
      if (norm.p <= 2.0) return base;
      if (std::isinf(norm.p)) return base * d;
      return base * std::pow(d, 1.0 - 2.0 / norm.p);
  }
  throw InvalidArgument("unsupported norm tag");
}

}  // namespace esmd
