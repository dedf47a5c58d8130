#include "fmicl/fdiv.hpp"

#include "fmicl/errors.hpp"
#include "fmicl/lambert_w.hpp"

#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <string>

namespace fmicl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// f*(t) for JS diverges as t -> log 2; closer than this is rejected.
constexpr double kJsUpperMargin = 1e-12;
constexpr double kSecondDifferenceTolerance = 1e-10;
constexpr int kConvexityGridPoints = 401;

template<std::floating_point T>
void
require_positive(T u, const char* what)
{
  if (!(u > 0) || std::isinf(u))
    throw DomainError(std::string(what) + ": argument must be a finite positive real");
}

template<std::floating_point T>
T
tsallis_exponent(T order)
{
  return order / (order - 1);
}

// Unweighted generator columns. T is double for the public API and long double
// for the Fenchel residual.
template<std::floating_point T>
T
base_f(Family family, T order, T u)
{
  require_positive(u, "f");
  switch (family) {
    case Family::KL:
      return u * std::log(u);
    case Family::ReverseKL:
      return -std::log(u);
    case Family::JS:
      return -(u + 1) * std::log((1 + u) / 2) + u * std::log(u);
    case Family::PearsonChi2:
      return (u - 1) * (u - 1);
    case Family::SquaredHellinger: {
      const T r = std::sqrt(u) - 1;
      return r * r;
    }
    case Family::NeymanChi2:
      return (1 - u) * (1 - u) / u;
    case Family::Jeffrey:
      return (u - 1) * std::log(u);
    case Family::Tsallis:
      // shifted by -1/(order-1) so that f(1) = 0
      return (std::pow(u, order) - 1) / (order - 1);
    case Family::VinczeLeCam:
      return (u - 1) * (u - 1) / (u + 1);
  }
  throw ParameterError("unknown divergence family");
}

template<std::floating_point T>
T
base_fprime(Family family, T order, T u)
{
  require_positive(u, "f'");
  switch (family) {
    case Family::KL:
      return std::log(u) + 1;
    case Family::ReverseKL:
      return -1 / u;
    case Family::JS:
      return std::numbers::ln2_v<T> + std::log(u / (1 + u));
    case Family::PearsonChi2:
      return 2 * (u - 1);
    case Family::SquaredHellinger:
      return 1 - 1 / std::sqrt(u);
    case Family::NeymanChi2:
      return 1 - 1 / (u * u);
    case Family::Jeffrey:
      return 1 - 1 / u + std::log(u);
    case Family::Tsallis:
      return tsallis_exponent(order) * std::pow(u, order - 1);
    case Family::VinczeLeCam:
      return 1 - 4 / ((u + 1) * (u + 1));
  }
  throw ParameterError("unknown divergence family");
}

ConjugateDomain
base_domain(Family family, double order)
{
  switch (family) {
    case Family::KL:
    case Family::Jeffrey:
      return { -kInf, kInf, true, BoundaryBehavior::Error, 0.0 };
    case Family::ReverseKL:
      return { -kInf, 0.0, false, BoundaryBehavior::Error, 0.0 };
    case Family::JS:
      return { -kInf, std::numbers::ln2, false, BoundaryBehavior::Error, 0.0 };
    case Family::PearsonChi2:
      return { -2.0, kInf, true, BoundaryBehavior::Clamp, -1.0 };
    case Family::SquaredHellinger:
      return { -kInf, 1.0, false, BoundaryBehavior::Error, 0.0 };
    case Family::NeymanChi2:
      return { -kInf, 1.0, true, BoundaryBehavior::Error, 0.0 };
    case Family::Tsallis:
      return { 0.0, kInf, true, BoundaryBehavior::Clamp, 1.0 / (order - 1.0) };
    case Family::VinczeLeCam:
      return { -3.0, 1.0, true, BoundaryBehavior::Clamp, -1.0 };
  }
  throw ParameterError("unknown divergence family");
}

template<std::floating_point T>
T
base_fstar(Family family, T order, T t)
{
  if (std::isnan(t))
    throw DomainError("f*: NaN argument");
  const ConjugateDomain dom = base_domain(family, static_cast<double>(order));
  if (dom.boundary_behavior == BoundaryBehavior::Clamp && t <= T(dom.lower)) {
    if (family == Family::Tsallis)
      return 1 / (order - 1);
    return T(dom.clamp_value);
  }
  T upper = T(dom.upper);
  if (family == Family::JS)
    upper -= T(kJsUpperMargin);
  const bool above = dom.upper_inclusive ? t > upper : t >= upper;
  if (above)
    throw DomainError("f*: argument " + std::to_string(static_cast<double>(t)) +
                      " outside the conjugate domain of " + to_string(family));

  switch (family) {
    case Family::KL:
      return std::exp(t - 1);
    case Family::ReverseKL:
      return -1 - std::log(-t);
    case Family::JS:
      return -std::log(2 - std::exp(t));
    case Family::PearsonChi2:
      return t * t / 4 + t;
    case Family::SquaredHellinger:
      return t / (1 - t);
    case Family::NeymanChi2:
      return 2 - 2 * std::sqrt(1 - t);
    case Family::Jeffrey: {
      const T w = lambert_w_of_exp<T>(1 - t);
      return w + 1 / w + t - 2;
    }
    case Family::Tsallis:
      return std::pow((order - 1) / order * t, tsallis_exponent(order)) + 1 / (order - 1);
    case Family::VinczeLeCam:
      return 4 - t - 4 * std::sqrt(1 - t);
  }
  throw ParameterError("unknown divergence family");
}

template<std::floating_point T>
T
base_fstar_of_fprime(Family family, T order, T u)
{
  require_positive(u, "f* o f'");
  switch (family) {
    case Family::KL:
      return u;
    case Family::ReverseKL:
      return std::log(u) - 1;
    case Family::JS:
      return std::log((1 + u) / 2);
    case Family::PearsonChi2:
      return u * u - 1;
    case Family::SquaredHellinger:
      return std::sqrt(u) - 1;
    case Family::NeymanChi2:
      return 2 - 2 / u;
    case Family::Jeffrey:
      // literal composition through the Lambert-W conjugate
      return base_fstar(family, order, base_fprime(family, order, u));
    case Family::Tsallis:
      return std::pow(u, order) + 1 / (order - 1);
    case Family::VinczeLeCam:
      return (u - 1) * (3 * u + 1) / ((u + 1) * (u + 1));
  }
  throw ParameterError("unknown divergence family");
}

template<std::floating_point T>
T
base_curvature(Family family, T order, T u)
{
  require_positive(u, "f''");
  switch (family) {
    case Family::KL:
      return 1 / u;
    case Family::ReverseKL:
      return 1 / (u * u);
    case Family::JS:
      return 1 / (u * (1 + u));
    case Family::PearsonChi2:
      return T(2);
    case Family::SquaredHellinger:
      return T(0.5) / (u * std::sqrt(u));
    case Family::NeymanChi2:
      return 2 / (u * u * u);
    case Family::Jeffrey:
      return 1 / u + 1 / (u * u);
    case Family::Tsallis:
      return order * std::pow(u, order - 2);
    case Family::VinczeLeCam:
      return 8 / ((u + 1) * (u + 1) * (u + 1));
  }
  throw ParameterError("unknown divergence family");
}

// Right scalar multiplication with weight w:
//   f_w(x)        = w f(x/w) - w f(1/w)
//   f_w'(x)       = f'(x/w)
//   f_w*(t)       = w f*(t) + w f(1/w)
//   f_w* o f_w'(x) = w (f* o f')(x/w) + w f(1/w)
template<std::floating_point T>
T
eval(Family family, T order, T w, FunctionKind kind, T x)
{
  const T offset = w == 1 ? T(0) : w * base_f(family, order, 1 / w);
  switch (kind) {
    case FunctionKind::F:
      return w == 1 ? base_f(family, order, x) : w * base_f(family, order, x / w) - offset;
    case FunctionKind::FPrime:
      return base_fprime(family, order, w == 1 ? x : x / w);
    case FunctionKind::FStar:
      return w == 1 ? base_fstar(family, order, x) : w * base_fstar(family, order, x) + offset;
    case FunctionKind::FStarOfFPrime:
      return w == 1 ? base_fstar_of_fprime(family, order, x)
                    : w * base_fstar_of_fprime(family, order, x / w) + offset;
  }
  throw ParameterError("unknown function kind");
}

struct TokenEntry
{
  Family family;
  const char* token;
  const char* name;
};

constexpr std::array<TokenEntry, 9> kTokens{ {
  { Family::KL, "kl", "KL" },
  { Family::ReverseKL, "rkl", "ReverseKL" },
  { Family::JS, "js", "JS" },
  { Family::PearsonChi2, "pearson", "PearsonChi2" },
  { Family::SquaredHellinger, "sh", "SquaredHellinger" },
  { Family::NeymanChi2, "neyman", "NeymanChi2" },
  { Family::Jeffrey, "jeffrey", "Jeffrey" },
  { Family::Tsallis, "tsallis", "Tsallis" },
  { Family::VinczeLeCam, "vlc", "VinczeLeCam" },
} };

const TokenEntry&
entry(Family family)
{
  for (const auto& e : kTokens)
    if (e.family == family)
      return e;
  throw ParameterError("unknown divergence family");
}

std::string
format_order(double order)
{
  std::string s = std::to_string(order);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.')
    s.pop_back();
  return s;
}

} // namespace

Divergence::Divergence(Family family)
  : family_(family)
  , order_(family == Family::Tsallis ? kDefaultTsallisOrder : 0.0)
{
}

Divergence::Divergence(Family family, double tsallis_order)
  : family_(family)
  , order_(tsallis_order)
{
  if (family != Family::Tsallis)
    throw ParameterError("a divergence order is only meaningful for Tsallis");
  if (!(tsallis_order > 1.0) || std::isinf(tsallis_order))
    throw ParameterError("Tsallis order must be a finite real > 1");
}

std::optional<double>
Divergence::tsallis_order() const
{
  if (family_ == Family::Tsallis)
    return order_;
  return std::nullopt;
}

ConjugateDomain
Divergence::conjugate_domain() const
{
  ConjugateDomain dom = base_domain(family_, order_);
  if (weight_ != 1.0) {
    const double offset = weight_ * base_f<double>(family_, order_, 1.0 / weight_);
    dom.clamp_value = weight_ * dom.clamp_value + offset;
  }
  return dom;
}

double
Divergence::f(double u) const
{
  return eval<double>(family_, order_, weight_, FunctionKind::F, u);
}

double
Divergence::fprime(double u) const
{
  return eval<double>(family_, order_, weight_, FunctionKind::FPrime, u);
}

double
Divergence::fstar(double t) const
{
  return eval<double>(family_, order_, weight_, FunctionKind::FStar, t);
}

double
Divergence::fstar_of_fprime(double u) const
{
  return eval<double>(family_, order_, weight_, FunctionKind::FStarOfFPrime, u);
}

double
Divergence::curvature(double u) const
{
  return base_curvature<double>(family_, order_, u / weight_) / weight_;
}

std::string
Divergence::token() const
{
  if (family_ == Family::Tsallis)
    return std::string("tsallis:") + format_order(order_);
  return entry(family_).token;
}

Divergence
parse_divergence(std::string_view token)
{
  const auto colon = token.find(':');
  const std::string_view head = token.substr(0, colon);
  for (const auto& e : kTokens) {
    if (head != e.token)
      continue;
    if (e.family != Family::Tsallis) {
      if (colon != std::string_view::npos)
        throw ParameterError("divergence token '" + std::string(token) + "' takes no parameter");
      return Divergence(e.family);
    }
    if (colon == std::string_view::npos)
      return Divergence(Family::Tsallis);
    const std::string arg(token.substr(colon + 1));
    std::size_t used = 0;
    double order = 0.0;
    try {
      order = std::stod(arg, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != arg.size())
      throw ParameterError("malformed Tsallis order in '" + std::string(token) + "'");
    return Divergence(Family::Tsallis, order);
  }
  throw ParameterError("unknown divergence token '" + std::string(token) + "'");
}

std::vector<Divergence>
all_divergences()
{
  std::vector<Divergence> out;
  for (const auto& e : kTokens)
    out.emplace_back(e.family);
  return out;
}

std::string
to_string(Family family)
{
  return entry(family).name;
}

std::string
to_string(HConvexity c)
{
  switch (c) {
    case HConvexity::StrictlyConvex:
      return "StrictlyConvex";
    case HConvexity::AffineOrLinear:
      return "AffineOrLinear";
    case HConvexity::Concave:
      return "Concave";
    case HConvexity::Indeterminate:
      return "Indeterminate";
  }
  return "Indeterminate";
}

double
evaluate(const Divergence& d, FunctionKind kind, double point)
{
  const double order = d.tsallis_order().value_or(0.0);
  return eval<double>(d.family(), order, d.weight(), kind, point);
}

double
fenchel_residual(const Divergence& d, double u)
{
  using T = long double;
  const T order = d.tsallis_order().value_or(0.0);
  const T w = d.weight();
  const T x = u;
  const T slope = eval<T>(d.family(), order, w, FunctionKind::FPrime, x);
  const T lhs = eval<T>(d.family(), order, w, FunctionKind::FStar, slope);
  const T rhs = x * slope - eval<T>(d.family(), order, w, FunctionKind::F, x);
  return static_cast<double>(std::abs(lhs - rhs));
}

double
h_value(const Divergence& d, double mu, double sigma2, double t)
{
  if (!(mu > 0.0) || !(sigma2 > 0.0))
    throw ParameterError("h_value: mu and sigma2 must be positive");
  if (!(t >= 0.0 && t <= 4.0))
    throw DomainError("h_value: squared distance on the unit sphere lies in [0, 4]");
  return d.fstar_of_fprime(mu * std::exp(-t / (2.0 * sigma2)));
}

HConvexity
classify_h_convexity(const Divergence& d, double mu, double sigma2)
{
  std::array<double, kConvexityGridPoints> h{};
  const double step = 4.0 / (kConvexityGridPoints - 1);
  for (int i = 0; i < kConvexityGridPoints; ++i)
    h[i] = h_value(d, mu, sigma2, i == kConvexityGridPoints - 1 ? 4.0 : i * step);

  bool all_positive = true, all_flat = true, all_negative = true;
  for (int i = 1; i + 1 < kConvexityGridPoints; ++i) {
    const double second = h[i + 1] - 2.0 * h[i] + h[i - 1];
    all_positive = all_positive && second > kSecondDifferenceTolerance;
    all_negative = all_negative && second < -kSecondDifferenceTolerance;
    all_flat = all_flat && std::abs(second) <= kSecondDifferenceTolerance;
  }
  if (all_positive)
    return HConvexity::StrictlyConvex;
  if (all_flat)
    return HConvexity::AffineOrLinear;
  if (all_negative)
    return HConvexity::Concave;
  return HConvexity::Indeterminate;
}

Divergence
apply_weighting(const Divergence& d, double weight)
{
  if (!(weight > 0.0) || std::isinf(weight))
    throw ParameterError("weighting parameter must be a finite positive real");
  Divergence out = d;
  out.weight_ = d.weight_ * weight;
  return out;
}

} // namespace fmicl
