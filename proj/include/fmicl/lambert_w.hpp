#pragma once

#include "fmicl/errors.hpp"

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>

namespace fmicl {

namespace detail {

inline constexpr int kLambertMaxIterations = 50;

template<std::floating_point T>
T
lambert_tolerance(T w)
{
  return 4 * std::numeric_limits<T>::epsilon() * (1 + std::abs(w));
}

} // namespace detail

//! Principal branch W0 of the Lambert-W function, w * exp(w) = x, by Halley
//! iteration.
template<std::floating_point T>
T
lambert_w(T x)
{
  const T branch = -1 / std::numbers::e_v<T>;
  const T slack = 8 * std::numeric_limits<T>::epsilon();
  if (std::isnan(x) || x < branch - slack)
    throw DomainError("lambert_w: argument below -1/e");
  if (x <= branch + slack)
    return T(-1);
  if (x == 0)
    return T(0);
  if (std::isinf(x))
    return x;

  T w;
  if (x < T(-0.25)) {
    // series about the branch point
    const T p = std::sqrt(2 * (std::numbers::e_v<T> * x + 1));
    w = -1 + p - p * p / 3 + T(11) / 72 * p * p * p;
  } else if (x <= 3) {
    w = std::log1p(x) * (1 - std::log1p(std::log1p(x)) / (2 + std::log1p(x)));
  } else {
    const T l1 = std::log(x);
    const T l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }

  for (int it = 0; it < detail::kLambertMaxIterations; ++it) {
    const T ew = std::exp(w);
    const T r = w * ew - x;
    const T wp1 = w + 1;
    if (wp1 == 0)
      break;
    const T step = r / (ew * wp1 - (w + 2) * r / (2 * wp1));
    w -= step;
    if (std::abs(step) <= detail::lambert_tolerance(w))
      break;
  }
  return w;
}

//! W0(exp(y)) for any real y, solved in log space so that large y does not
//! overflow: w + log(w) = y.
template<std::floating_point T>
T
lambert_w_of_exp(T y)
{
  if (std::isnan(y))
    throw DomainError("lambert_w_of_exp: NaN argument");
  if (y <= 1)
    return lambert_w(std::exp(y));

  T w = y - std::log(y);
  if (w <= 0)
    w = 1;
  for (int it = 0; it < detail::kLambertMaxIterations; ++it) {
    const T g = w + std::log(w) - y;
    const T g1 = 1 + 1 / w;
    const T g2 = -1 / (w * w);
    const T step = 2 * g * g1 / (2 * g1 * g1 - g * g2);
    w -= step;
    if (std::abs(step) <= detail::lambert_tolerance(w))
      break;
  }
  return w;
}

inline double
lambert_w(double x)
{
  return lambert_w<double>(x);
}

} // namespace fmicl
