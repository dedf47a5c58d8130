#pragma once

#include "fmicl/errors.hpp"

#include "json.hpp"

#include <set>
#include <string>
#include <type_traits>
#include <vector>

namespace fmicl::json_fields {

inline void
reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& section)
{
  if (!j.is_object())
    throw ConfigError(section + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key))
      throw ConfigError(section + ": unknown key '" + key + "'");
}

namespace detail {

template<typename T>
bool
integer_fits(const nlohmann::json& v)
{
  if constexpr (std::is_same_v<T, bool>)
    return v.is_boolean();
  else if constexpr (std::is_unsigned_v<T>)
    return v.is_number_unsigned();
  else
    return v.is_number_integer();
}

template<typename T>
void
check_type(const nlohmann::json& v, const std::string& where)
{
  if constexpr (std::is_integral_v<T>) {
    if (!integer_fits<T>(v))
      throw ConfigError(where + ": expected " + (std::is_unsigned_v<T> ? "a non-negative integer" : "an integer"));
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number())
      throw ConfigError(where + ": expected a number");
  }
}

template<typename T>
struct is_vector : std::false_type
{};
template<typename T>
struct is_vector<std::vector<T>> : std::true_type
{};

} // namespace detail

//! Leaves `out` untouched when `key` is absent. Integers must be JSON
//! integers; a fractional value is an error rather than a truncation.
template<typename T>
void
read_field(const nlohmann::json& j, const char* key, T& out, const std::string& section)
{
  if (!j.contains(key))
    return;
  const std::string where = section + "." + key;
  const nlohmann::json& v = j.at(key);
  if constexpr (detail::is_vector<T>::value) {
    if (!v.is_array())
      throw ConfigError(where + ": expected an array");
    for (const auto& e : v)
      detail::check_type<typename T::value_type>(e, where);
  } else {
    detail::check_type<T>(v, where);
  }
  try {
    out = v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

} // namespace fmicl::json_fields
