#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fmicl {

enum class Family
{
  KL,
  ReverseKL,
  JS,
  PearsonChi2,
  SquaredHellinger,
  NeymanChi2,
  Jeffrey,
  Tsallis,
  VinczeLeCam
};

//! Which closed-form column of a generator to evaluate.
enum class FunctionKind
{
  F,
  FPrime,
  FStar,
  FStarOfFPrime
};

enum class BoundaryBehavior
{
  Clamp,
  Error
};

enum class HConvexity
{
  StrictlyConvex,
  AffineOrLinear,
  Concave,
  Indeterminate
};

//! Where the conjugate f* is finite. Points at or below `lower` are either
//! clamped to `clamp_value` or rejected; points above `upper` (or at it, when
//! `upper_inclusive` is false) always raise DomainError.
struct ConjugateDomain
{
  double lower;
  double upper;
  bool upper_inclusive;
  BoundaryBehavior boundary_behavior;
  double clamp_value;
};

//! One generator f of the f-divergence family, optionally transformed by the
//! right scalar multiplication f_w(x) = w f(x / w) - w f(1 / w).
//!
//! Immutable; every evaluator is a pure function.
class Divergence
{
public:
  static constexpr double kDefaultTsallisOrder = 3.0;

  explicit Divergence(Family family);
  Divergence(Family family, double tsallis_order);

  Family family() const { return family_; }
  std::optional<double> tsallis_order() const;
  double weight() const { return weight_; }
  ConjugateDomain conjugate_domain() const;

  double f(double u) const;
  double fprime(double u) const;
  double fstar(double t) const;
  double fstar_of_fprime(double u) const;
  //! f''(u); the derivative of f* o f' is u f''(u).
  double curvature(double u) const;

  //! Serialization token: "kl", "rkl", "js", "pearson", "sh", "neyman",
  //! "jeffrey", "tsallis:<order>", "vlc". The weight is not encoded.
  std::string token() const;

  friend Divergence apply_weighting(const Divergence& d, double weight);

private:
  Family family_;
  double order_;
  double weight_{ 1.0 };
};

Divergence
parse_divergence(std::string_view token);

//! All nine families, Tsallis at the default order.
std::vector<Divergence>
all_divergences();

std::string
to_string(Family family);
std::string
to_string(HConvexity c);

double
evaluate(const Divergence& d, FunctionKind kind, double point);

//! |f*(f'(u)) - (u f'(u) - f(u))| with both sides evaluated from the closed
//! forms in extended precision, rounded to double.
double
fenchel_residual(const Divergence& d, double u);

//! h(t) = f* o f' o G(t) with G(t) = mu exp(-t / (2 sigma2)).
double
h_value(const Divergence& d, double mu, double sigma2, double t);

//! Sign of the second differences of h on a 401-point grid over [0, 4].
HConvexity
classify_h_convexity(const Divergence& d, double mu, double sigma2);

Divergence
apply_weighting(const Divergence& d, double weight);

} // namespace fmicl
