#pragma once

#include <cstddef>
#include <string_view>

namespace blockflow {

enum class Precision { Single, Double };

constexpr std::size_t element_bytes(Precision p) noexcept {
  return p == Precision::Single ? 4 : 8;
}

constexpr std::string_view to_string(Precision p) noexcept {
  return p == Precision::Single ? "single" : "double";
}

template <class T>
constexpr Precision precision_of() noexcept;

template <>
constexpr Precision precision_of<float>() noexcept {
  return Precision::Single;
}

template <>
constexpr Precision precision_of<double>() noexcept {
  return Precision::Double;
}

/// Calls `fn` with a value-initialised float or double matching `p`.
template <class Fn>
decltype(auto) visit_precision(Precision p, Fn&& fn) {
  if (p == Precision::Single) return fn(float{});
  return fn(double{});
}

}  // namespace blockflow
