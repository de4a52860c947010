#include "esmd/hard_design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace esmd {

namespace {
// floor() that tolerates pow() landing just below an exact integer.
Index robust_floor(double v) { return static_cast<Index>(std::floor(v * (1.0 + 1e-12) + 1e-12)); }
}  // namespace

HardDesignShape hard_design_shape(Index n, Index d, double p) {
  if (n < 1 || d < 1) throw InvalidArgument("build_hard_design: n and d must be >= 1");
  if (!(p >= 1.0 && p <= 2.0)) throw InvalidArgument("build_hard_design: p must lie in [1, 2]");
  const auto nn = static_cast<double>(n);
  const auto dd = static_cast<double>(d);
  const double inv_q = 1.0 - 1.0 / p;  // 1/q with 1/p + 1/q = 1
  HardDesignShape s;
  const Index m_raw = robust_floor(std::pow(dd, 1.0 / p) / std::sqrt(nn));
  const Index k_raw = robust_floor(std::sqrt(nn) * std::pow(dd, inv_q));
  s.block = std::max<Index>(1, m_raw);
  s.blocks = std::max<Index>(1, std::min({k_raw, n, d / s.block}));
  s.clamped = m_raw < 1 || k_raw < 1 || s.blocks != k_raw;
  const double lo = std::pow(nn, p / 2.0);
  const double hi = inv_q > 0.0 ? std::pow(nn, 0.5 / inv_q) : std::numeric_limits<double>::infinity();
  s.outside_regime = !(p > 1.0 && p < 2.0) || dd < lo * (1.0 - 1e-12) || dd > hi * (1.0 + 1e-12);
  return s;
}

DesignMatrix build_hard_design(Index n, Index d, double p) {
  const HardDesignShape s = hard_design_shape(n, d, p);
  Matrix x = Matrix::Zero(n, d);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < s.blocks; ++i)
    for (Index j = 0; j < s.block; ++j) x(i, i * s.block + j) = root_n;
  return DesignMatrix(std::move(x), s.clamped);
}

}  // namespace esmd
