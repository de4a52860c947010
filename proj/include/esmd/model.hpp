#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>

#include "esmd/errors.hpp"
#include "esmd/rng.hpp"

namespace esmd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Reference norm for smoothness and strong convexity constants.
struct NormTag {
  enum class Kind { L2, Lp, L1 };
  Kind kind = Kind::L2;
  double p = 2.0;

  static NormTag l2() { return {Kind::L2, 2.0}; }
  static NormTag l1() { return {Kind::L1, 1.0}; }
  static NormTag lp(double p) { return {Kind::Lp, p}; }
};

double norm_in(const NormTag& tag, const Vector& v);

// Immutable design; singular values are computed once on first use and
// shared by all copies.
class DesignMatrix {
 public:
  explicit DesignMatrix(Matrix entries, bool degenerate_size = false);

  Index rows() const noexcept { return entries_->rows(); }
  Index cols() const noexcept { return entries_->cols(); }
  const Matrix& matrix() const noexcept { return *entries_; }

  double spectral_norm() const;
  int rank() const;
  // Set when a structured construction had to clamp its block sizes.
  bool degenerate_size() const noexcept { return degenerate_size_; }

 private:
  struct Cache;
  std::shared_ptr<const Matrix> entries_;
  std::shared_ptr<Cache> cache_;
  bool degenerate_size_ = false;
};

struct RegressionInstance {
  DesignMatrix design;
  Vector y;
  std::optional<Vector> ground_truth;
  // Stream that produced the noise; restarting it regenerates y - X alpha*.
  std::uint64_t noise_seed = 0;
  std::uint64_t noise_stream = 0;
  double noise_sd = 1.0;

  Index n() const noexcept { return design.rows(); }
  Index d() const noexcept { return design.cols(); }
};

RegressionInstance make_instance(DesignMatrix design, Vector y,
                                 std::optional<Vector> ground_truth = std::nullopt);

double empirical_risk(const RegressionInstance& instance, const Vector& alpha);
Vector empirical_risk_gradient(const RegressionInstance& instance, const Vector& alpha);
double in_sample_risk(const DesignMatrix& design, const Vector& alpha, const Vector& truth);

// Expression-level kernels shared by the solvers.
template <class DX, class DA, class DY>
double empirical_risk(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DA>& alpha,
                      const Eigen::MatrixBase<DY>& y) {
  return (x * alpha - y).squaredNorm() / static_cast<double>(x.rows());
}

template <class DX, class DA, class DY>
Vector empirical_risk_gradient(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DA>& alpha,
                               const Eigen::MatrixBase<DY>& y) {
  return (2.0 / static_cast<double>(x.rows())) * (x.transpose() * (x * alpha - y));
}

Vector draw_noise(RngStream rng, Index n, double sd = 1.0);
RegressionInstance sample_instance(const DesignMatrix& design, const Vector& truth, RngStream rng,
                                   double noise_sd = 1.0);
// The noise vector the instance was generated with.
Vector reconstruct_noise(const RegressionInstance& instance);

DesignMatrix sample_gaussian_design(Index n, Index d, RngStream rng);

int matrix_rank(const DesignMatrix& design);
double smoothness_constant(const DesignMatrix& design, const NormTag& norm);

void require_length(const Vector& v, Index expected, const char* what);

}  // namespace esmd
