#pragma once

#include <vector>

#include "esmd/model.hpp"

namespace esmd {

// Dense two-phase simplex with Bland's rule for
//   minimize c'x  subject to  A x = b,  x >= 0.
struct LpResult {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  Vector x;
  // Multipliers y with A'y <= c (reduced costs non-negative) at optimality.
  Vector duals;
  double objective = 0.0;
  std::vector<Index> basis;
};

LpResult solve_standard_lp(const Vector& c, const Matrix& a, const Vector& b);

}  // namespace esmd
