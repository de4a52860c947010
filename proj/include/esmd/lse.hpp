#pragma once

#include <optional>
#include <vector>

#include "esmd/convex_body.hpp"
#include "esmd/model.hpp"

namespace esmd {

struct LseOptions {
  std::optional<double> tol;  // default 1e-8 (1 + R_n(0))
  std::size_t max_iters = 100000;
  std::optional<Vector> start;  // must lie in tau K
  // Projected accelerated gradient first when the body supports projection.
  bool accelerate = true;
  // Away steps for bodies with an atom list. Empty: enabled when available.
  std::optional<bool> away_steps;
  // Certified bound on |X a - X a_opt| / sqrt(n): the gap target becomes
  // min(tol, prediction_tol^2) since the gap dominates that squared distance.
  std::optional<double> prediction_tol;
};

struct LseSolution {
  Vector alpha;
  Vector predictions;
  double fw_gap = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;
  double tolerance = 0.0;
  // Objective after every conditional-gradient step (empty when the
  // accelerated phase certified the solution on its own).
  std::vector<double> fw_objectives;
};

class LsePartialResult : public Error {
 public:
  LsePartialResult(LseSolution partial)
      : Error("solve_lse: iteration budget exhausted with gap " + std::to_string(partial.fw_gap)),
        partial_(std::move(partial)) {}
  const LseSolution& partial() const noexcept { return partial_; }
  double gap() const noexcept { return partial_.fw_gap; }

 private:
  LseSolution partial_;
};

// argmin over tau K of (1/n)|X alpha - y|^2, certified by the Frank-Wolfe gap.
LseSolution solve_constrained_ls(const DesignMatrix& design, const Vector& y, const ConvexBody& body, double tau,
                                 const LseOptions& options = {});
LseSolution solve_lse(const RegressionInstance& instance, const ConvexBody& body, double tau,
                      const LseOptions& options = {});
LseSolution solve_lse(const RegressionInstance& instance, const ConvexBody& body, double tau, double tol,
                      std::size_t max_iters);
double lse_risk(const RegressionInstance& instance, const LseSolution& solution);

}  // namespace esmd
