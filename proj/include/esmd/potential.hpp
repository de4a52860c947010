#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esmd/convex_body.hpp"
#include "esmd/model.hpp"

namespace esmd {

enum class PotentialKind {
  SquaredL2,
  SquaredLp,
  HuberMoreau,
  AdjHypentropy,
  Sigmoidal,
  LogSumExpHull,
  SmoothNormPlusRidge,
  GenericMoreau,
};

struct PotentialConstants {
  double rho = 0.0;  // strong convexity modulus in `rho_norm`
  NormTag rho_norm = NormTag::l2();
  double c_l = 1.0;
  double c_u = 1.0;
  double c_a = 1.0;  // always c_l * c_u
};

struct PotentialCaps {
  bool continuous_ok = false;
  bool discrete_ok = false;
  bool has_closed_inverse = false;
};

// Mirror map with certified constants. Immutable and cheap to copy.
class Potential {
 public:
  class Model {
   public:
    virtual ~Model() = default;
    virtual double value(const Vector& alpha) const = 0;
    virtual Vector gradient(const Vector& alpha) const = 0;
    virtual Matrix hessian(const Vector& alpha) const;
    virtual Vector inverse_gradient(const Vector& z) const = 0;

    PotentialKind kind = PotentialKind::SquaredL2;
    Index dim = 0;
    PotentialConstants constants;
    PotentialCaps caps;
    std::string name;
    std::vector<std::pair<std::string, double>> parameters;
  };

  explicit Potential(std::shared_ptr<const Model> model);

  PotentialKind kind() const noexcept { return model_->kind; }
  Index dim() const noexcept { return model_->dim; }
  const PotentialConstants& constants() const noexcept { return model_->constants; }
  const PotentialCaps& caps() const noexcept { return model_->caps; }
  const std::string& name() const noexcept { return model_->name; }
  const std::vector<std::pair<std::string, double>>& parameters() const noexcept { return model_->parameters; }
  std::optional<double> parameter(const std::string& key) const;

  double value(const Vector& alpha) const;
  Vector gradient(const Vector& alpha) const;
  Matrix hessian(const Vector& alpha) const;
  // alpha with |grad psi(alpha) - z|_2 <= 1e-8 (1 + |z|_2).
  Vector inverse_gradient(const Vector& z) const;
  double bregman(const Vector& alpha, const Vector& base) const;

  // Same map with different approximation constants (c_a recomputed).
  Potential with_approximation(double c_l, double c_u) const;

 private:
  std::shared_ptr<const Model> model_;
};

// Direct constructors; parameters are taken as given.
Potential squared_l2(Index d);
Potential squared_lp(Index d, double p, double c_l, double c_u);
Potential huber_moreau(Index d, double lambda, double rho);
Potential adj_hypentropy(Index d, double gamma);
Potential sigmoidal(Index d, double gamma);
Potential log_sum_exp_hull(const Matrix& a, double gamma, double rho);
Potential generic_moreau(const ConvexBody& body, double lambda, double rho, double c_l = 2.0, double c_u = 2.0);

enum class StandardPotential { SquaredLp, HuberMoreau, AdjHypentropy, Sigmoidal };

struct StandardOverrides {
  std::optional<double> p;
  std::optional<double> lambda;
  std::optional<double> rho;
  std::optional<double> gamma;
  // Reject parameters outside the admissible range for (d, tau).
  bool enforce_bounds = true;
};

double min_hypentropy_gamma(Index d, double tau);
Potential make_standard_potential(StandardPotential name, Index d, double tau, const StandardOverrides& overrides = {});
std::optional<StandardPotential> parse_standard_potential(const std::string& text);
std::string to_string(StandardPotential name);
std::string to_string(PotentialKind kind);

Potential make_msconvexhull_potential(const Matrix& a, double tau, double vertices_norm_sq_max);
Potential make_smooth_norm_potential(const ConvexBody& body, double c_k);

// Moreau envelope machinery shared with the assumption-driven constructor.
struct MoreauProx {
  Vector point;   // prox of lambda * phi^2 at alpha
  double gauge;   // phi(point)
  double value;   // envelope value
};
MoreauProx moreau_squared_gauge(const ConvexBody& body, double lambda, const Vector& alpha);

}  // namespace esmd
