#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace slrk {

/// Arbitrary-precision rational number, always kept in lowest terms.
using Rational = boost::multiprecision::cpp_rational;

/// Arithmetic mode of a tableau and everything derived from it.
enum class Mode { rational, floating };

inline const char* to_string(Mode m) { return m == Mode::rational ? "rational" : "float"; }

template <class T>
inline constexpr bool is_rational_v = std::is_same_v<T, Rational>;

/// Default "is zero" tolerance for float-mode residuals.
inline constexpr double default_tol = 1e-10;

template <class T>
constexpr Mode mode_of() {
  return is_rational_v<T> ? Mode::rational : Mode::floating;
}

template <class T>
double to_double(const T& x) {
  if constexpr (is_rational_v<T>) {
    return x.template convert_to<double>();
  } else {
    return static_cast<double>(x);
  }
}

template <class T>
double magnitude(const T& x) {
  return std::abs(to_double(x));
}

/// Exact comparison with zero in rational mode, |x| <= tol otherwise.
template <class T>
bool is_zero(const T& x, double tol) {
  if constexpr (is_rational_v<T>) {
    return x == 0;
  } else {
    return std::abs(x) <= tol;
  }
}

template <class T>
T from_int(std::int64_t v) {
  return T(v);
}

template <class T>
T ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("zero denominator");
  if constexpr (is_rational_v<T>) {
    return Rational(num, den);
  } else {
    return static_cast<double>(num) / static_cast<double>(den);
  }
}

inline Rational factorial_rational(int n) {
  Rational r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

template <class T>
T factorial(int n) {
  if constexpr (is_rational_v<T>) {
    return factorial_rational(n);
  } else {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
  }
}

template <class T>
T power(const T& x, int k) {
  T r = from_int<T>(1);
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

/// "p/q" for rationals (just "p" when q == 1), shortest round-trip text otherwise.
template <class T>
std::string format_scalar(const T& x) {
  if constexpr (is_rational_v<T>) {
    return x.str();
  } else {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
  }
}

/// Parses "p/q" or an integer literal exactly. Returns false if the text is
/// not of that form (decimal points, exponents and so on).
inline bool parse_rational(std::string_view text, Rational& out) {
  auto is_int = [](std::string_view s) {
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) s.remove_prefix(1);
    if (s.empty()) return false;
    for (char ch : s)
      if (ch < '0' || ch > '9') return false;
    return true;
  };
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  auto slash = text.find('/');
  std::string_view num = trim(text.substr(0, slash));
  std::string_view den = slash == std::string_view::npos ? std::string_view("1") : trim(text.substr(slash + 1));
  if (!is_int(num) || !is_int(den)) return false;
  auto strip_plus = [](std::string_view s) { return (!s.empty() && s.front() == '+') ? s.substr(1) : s; };
  boost::multiprecision::cpp_int n(std::string(strip_plus(num)));
  boost::multiprecision::cpp_int d(std::string(strip_plus(den)));
  if (d == 0) throw std::invalid_argument("zero denominator in \"" + std::string(text) + "\"");
  out = Rational(n, d);
  return true;
}

template <class T>
using Vec = std::vector<T>;

}  // namespace slrk
