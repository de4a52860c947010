#pragma once

#include <memory>
#include <optional>

#include "esmd/model.hpp"

namespace esmd {

// Compact convex set with the origin in its interior, described natively by
// one of a few representations. Cheap to copy; the description is shared.
class ConvexBody {
 public:
  enum class Kind { LpBall, PolytopeH, PolytopeV, Scaled, Translated };

  // Unit l_p ball in R^d, p in [1, inf].
  static ConvexBody lp_ball(Index d, double p);
  // {alpha : A alpha <= 1}; rejected when unbounded.
  static ConvexBody polytope_h(Matrix a);
  // conv(rows of vertices). Interior of the origin is certified by linear
  // programming unless `assume_interior` is set.
  static ConvexBody polytope_v(Matrix vertices, bool assume_interior = false);

  Kind kind() const noexcept;
  Index dim() const noexcept;

  double p() const;                 // LpBall
  const Matrix& constraints() const;  // PolytopeH, one row per constraint
  const Matrix& vertices() const;   // PolytopeV, one row per vertex
  const ConvexBody& inner() const;  // Scaled, Translated
  double factor() const;            // Scaled
  const Vector& shift() const;      // Translated
  // PolytopeH only: the constraint rows sum to zero (needed for a centred
  // log-sum-exp potential).
  bool rows_balanced() const;

  struct Node;

 private:
  explicit ConvexBody(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
  friend ConvexBody scale(const ConvexBody&, double);
  friend ConvexBody translate(const ConvexBody&, const Vector&);
};

struct BodyPoint {
  Vector coords;
  std::optional<double> certificate;  // gauge value at coords
  bool zero_direction = false;        // lmo called with c = 0
};

ConvexBody scale(const ConvexBody& body, double tau);
ConvexBody translate(const ConvexBody& body, const Vector& shift);

double minkowski(const ConvexBody& body, const Vector& alpha);
// argmax over K of <direction, alpha>.
BodyPoint lmo(const ConvexBody& body, const Vector& direction);
double support(const ConvexBody& body, const Vector& direction);
bool membership(const ConvexBody& body, const Vector& alpha, double tol = 0.0);

bool supports_projection(const ConvexBody& body);
BodyPoint project_euclidean(const ConvexBody& body, const Vector& point);

// Polytopes with an explicit finite atom list (l1 balls, V-rep bodies and
// their images under scaling/translation).
bool has_atoms(const ConvexBody& body);
Index atom_count(const ConvexBody& body);
Vector atom(const ConvexBody& body, Index index);
Index best_atom(const ConvexBody& body, const Vector& direction);

// Upper bound on max_{alpha in K} |alpha|_2^2: exact where a closed form
// exists, otherwise support-function probing plus a 5% inflation.
double max_squared_norm(const ConvexBody& body, RngStream rng);

// Root u in [0, a] of u + c u^{p-1} = a (a, c >= 0, p > 1).
double solve_shrink(double a, double c, double p);

// Random point on the boundary of K along a Gaussian direction.
Vector sample_boundary(const ConvexBody& body, RngStream& rng);

}  // namespace esmd
