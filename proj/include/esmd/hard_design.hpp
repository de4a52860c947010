#pragma once

#include "esmd/model.hpp"

namespace esmd {

struct HardDesignShape {
  Index block = 0;   // ones per row block (m)
  Index blocks = 0;  // number of nonzero rows (k)
  bool clamped = false;
  bool outside_regime = false;  // n^{p/2} <= d <= n^{q/2} fails
};

HardDesignShape hard_design_shape(Index n, Index d, double p);

// sqrt(n) [[A, 0], [0, 0]] where A (k x km) has rows made of disjoint blocks
// of m ones. Nonzero columns have Euclidean norm sqrt(n).
DesignMatrix build_hard_design(Index n, Index d, double p);

}  // namespace esmd
