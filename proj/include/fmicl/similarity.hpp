#pragma once

#include "fmicl/fdiv.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <variant>

namespace fmicl {

using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

inline constexpr double kUnitNormTolerance = 1e-6;

//! mu * exp(-sqdist / (2 sigma2))
double
gaussian_kernel(double mu, double sigma2, double sqdist);

//! s_f(x, y) = f'(G(|x - y|^2)).
struct GaussianSimilarity
{
  double mu{ 1.0 };
  double sigma2{ 0.5 };
  Divergence divergence{ Family::KL };

  //! Score from a precomputed squared distance; no norm checks.
  double from_sqdist(double sqdist) const;
};

struct CosineSimilarity
{
  static constexpr double kDefaultTemperature = 0.5;
  double temperature{ kDefaultTemperature };
};

using AnySimilarity = std::variant<GaussianSimilarity, CosineSimilarity>;

//! Throws NormalizationError unless | |x| - 1 | <= tol.
void
require_unit_norm(const RowRef& x, double tol = kUnitNormTolerance);

double
f_gaussian(const GaussianSimilarity& sim, const RowRef& x, const RowRef& y);

double
cosine(const CosineSimilarity& sim, const RowRef& x, const RowRef& y);

//! Dispatches to f_gaussian or cosine.
double
score(const AnySimilarity& sim, const RowRef& x, const RowRef& y);

//! Same as score() but skips the unit-norm checks; used inside the objectives
//! once the batch has been validated.
double
score_unchecked(const AnySimilarity& sim, const RowRef& x, const RowRef& y);

//! "fgaussian" or "cosine:<temperature>".
std::string
similarity_token(const AnySimilarity& sim);

//! Parses a similarity token; the Gaussian parameters come from the caller
//! because they are not part of the token.
AnySimilarity
parse_similarity(std::string_view token, const GaussianSimilarity& gaussian_defaults);

void
validate(const GaussianSimilarity& sim);

} // namespace fmicl
