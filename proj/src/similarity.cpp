#include "fmicl/similarity.hpp"

#include "fmicl/errors.hpp"

#include <cmath>
#include <sstream>

namespace fmicl {

double
gaussian_kernel(double mu, double sigma2, double sqdist)
{
  if (!(mu > 0.0) || !(sigma2 > 0.0) || std::isinf(mu) || std::isinf(sigma2))
    throw ParameterError("gaussian_kernel: mu and sigma2 must be finite and positive");
  if (!(sqdist >= 0.0))
    throw DomainError("gaussian_kernel: squared distance must be nonnegative");
  return mu * std::exp(-sqdist / (2.0 * sigma2));
}

double
GaussianSimilarity::from_sqdist(double sqdist) const
{
  return divergence.fprime(gaussian_kernel(mu, sigma2, sqdist));
}

void
validate(const GaussianSimilarity& sim)
{
  if (!(sim.mu > 0.0) || !(sim.sigma2 > 0.0) || std::isinf(sim.mu) || std::isinf(sim.sigma2))
    throw ParameterError("f-Gaussian similarity: mu and sigma2 must be finite and positive");
}

void
require_unit_norm(const RowRef& x, double tol)
{
  const double n = x.norm();
  if (!(std::abs(n - 1.0) <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << "embedding row has norm " << n << ", expected 1 within " << tol;
    throw NormalizationError(os.str());
  }
}

double
f_gaussian(const GaussianSimilarity& sim, const RowRef& x, const RowRef& y)
{
  require_unit_norm(x);
  require_unit_norm(y);
  return sim.from_sqdist((x - y).squaredNorm());
}

double
cosine(const CosineSimilarity& sim, const RowRef& x, const RowRef& y)
{
  if (!(sim.temperature > 0.0))
    throw ParameterError("cosine similarity: temperature must be positive");
  require_unit_norm(x);
  require_unit_norm(y);
  return x.dot(y) / sim.temperature;
}

double
score(const AnySimilarity& sim, const RowRef& x, const RowRef& y)
{
  return std::visit(
    [&](const auto& s) -> double {
      if constexpr (std::is_same_v<std::decay_t<decltype(s)>, GaussianSimilarity>)
        return f_gaussian(s, x, y);
      else
        return cosine(s, x, y);
    },
    sim);
}

double
score_unchecked(const AnySimilarity& sim, const RowRef& x, const RowRef& y)
{
  if (const auto* g = std::get_if<GaussianSimilarity>(&sim))
    return g->from_sqdist((x - y).squaredNorm());
  return x.dot(y) / std::get<CosineSimilarity>(sim).temperature;
}

std::string
similarity_token(const AnySimilarity& sim)
{
  if (std::holds_alternative<GaussianSimilarity>(sim))
    return "fgaussian";
  std::ostringstream os;
  os.precision(17);
  os << "cosine:" << std::get<CosineSimilarity>(sim).temperature;
  return os.str();
}

AnySimilarity
parse_similarity(std::string_view token, const GaussianSimilarity& gaussian_defaults)
{
  if (token == "fgaussian") {
    validate(gaussian_defaults);
    return gaussian_defaults;
  }
  if (token == "cosine")
    return CosineSimilarity{};
  constexpr std::string_view prefix = "cosine:";
  if (token.substr(0, prefix.size()) == prefix) {
    const std::string arg(token.substr(prefix.size()));
    std::size_t used = 0;
    double tau = 0.0;
    try {
      tau = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size() || !(tau > 0.0) || std::isinf(tau))
      throw ParameterError("malformed cosine temperature in '" + std::string(token) + "'");
    return CosineSimilarity{ tau };
  }
  throw ParameterError("unknown similarity token '" + std::string(token) + "'");
}

} // namespace fmicl
