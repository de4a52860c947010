#include "esmd/simplex_lp.hpp"

#include <cmath>
#include <limits>

namespace esmd {
namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-11;

struct Tableau {
  Matrix t;  // rows: constraints then objective; last column is the rhs
  std::vector<Index> basis;
  Index rows() const { return t.rows() - 1; }
  Index rhs() const { return t.cols() - 1; }

  void pivot(Index r, Index col) {
    t.row(r) /= t(r, col);
    for (Index i = 0; i < t.rows(); ++i) {
      if (i != r && t(i, col) != 0.0) t.row(i) -= t(i, col) * t.row(r);
    }
    basis[static_cast<std::size_t>(r)] = col;
  }

  // Returns false when the objective is unbounded below along some column.
  bool run(Index usable_cols) {
    const Index obj = rows();
    for (std::size_t guard = 0; guard < 100000; ++guard) {
      Index enter = -1;
      for (Index j = 0; j < usable_cols; ++j) {
        if (t(obj, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < obj; ++i) {
        if (t(i, enter) > kPivotTol) {
          const double ratio = t(i, rhs()) / t(i, enter);
          if (ratio < best - 1e-14 ||
              (std::abs(ratio - best) <= 1e-14 && leave >= 0 &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw Error("simplex iteration guard exceeded");
  }
};

}  // namespace

LpResult solve_standard_lp(const Vector& c, const Matrix& a, const Vector& b) {
  const Index r = a.rows();
  const Index m = a.cols();
  if (c.size() != m || b.size() != r) throw InvalidArgument("solve_standard_lp: shape mismatch");

  Tableau tab;
  tab.t = Matrix::Zero(r + 1, m + r + 1);
  tab.basis.resize(static_cast<std::size_t>(r));
  for (Index i = 0; i < r; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    tab.t.row(i).head(m) = sign * a.row(i);
    tab.t(i, m + i) = 1.0;
    tab.t(i, m + r) = sign * b(i);
    tab.basis[static_cast<std::size_t>(i)] = m + i;
  }
  // Phase 1 minimizes the artificial sum.
  for (Index i = 0; i < r; ++i) {
    tab.t.row(r).head(m) -= tab.t.row(i).head(m);
    tab.t(r, m + r) -= tab.t(i, m + r);
  }
  LpResult out;
  tab.run(m + r);
  const double scale = 1.0 + b.lpNorm<1>();
  if (-tab.t(r, m + r) > 1e-9 * scale) {
    out.status = LpResult::Status::Infeasible;
    return out;
  }
  // Drive artificials out; rows where that is impossible are redundant.
  std::vector<bool> redundant(static_cast<std::size_t>(r), false);
  for (Index i = 0; i < r; ++i) {
    if (tab.basis[static_cast<std::size_t>(i)] < m) continue;
    Index col = -1;
    double best = kPivotTol;
    for (Index j = 0; j < m; ++j) {
      if (std::abs(tab.t(i, j)) > best) {
        best = std::abs(tab.t(i, j));
        col = j;
      }
    }
    if (col >= 0) {
      tab.pivot(i, col);
    } else {
      redundant[static_cast<std::size_t>(i)] = true;
    }
  }
  // Phase 2 reduced costs. Artificial columns are excluded from entering
  // because run() only scans the first m columns.
  tab.t.row(r).setZero();
  tab.t.row(r).head(m) = c.transpose();
  for (Index i = 0; i < r; ++i) {
    const Index bcol = tab.basis[static_cast<std::size_t>(i)];
    if (bcol < m && c(bcol) != 0.0) tab.t.row(r) -= c(bcol) * tab.t.row(i);
  }
  if (!tab.run(m)) {
    out.status = LpResult::Status::Unbounded;
    return out;
  }
  out.status = LpResult::Status::Optimal;
  out.x = Vector::Zero(m);
  std::vector<Index> rows_kept;
  for (Index i = 0; i < r; ++i) {
    const Index bcol = tab.basis[static_cast<std::size_t>(i)];
    if (bcol < m) {
      out.x(bcol) = std::max(0.0, tab.t(i, m + r));
      out.basis.push_back(bcol);
    }
  }
  out.objective = c.dot(out.x);
  // Duals from B'y = c_B (minimum-norm solve covers redundant rows).
  const auto nb = static_cast<Index>(out.basis.size());
  Matrix bt(nb, r);
  Vector cb(nb);
  for (Index k = 0; k < nb; ++k) {
    bt.row(k) = a.col(out.basis[static_cast<std::size_t>(k)]).transpose();
    cb(k) = c(out.basis[static_cast<std::size_t>(k)]);
  }
  out.duals = nb > 0 ? Vector(bt.completeOrthogonalDecomposition().solve(cb)) : Vector(Vector::Zero(r));
  return out;
}

}  // namespace esmd
