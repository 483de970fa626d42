#pragma once

// Built-in tableaux. Rational entries are kept exact; methods with
// irrational coefficients (Gauss, 3-stage Radau IIA, the Norsett SDIRK) are
// stored in binary64.

#include "slrk/tableau.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace slrk {

namespace detail {

inline RationalTableau rational_tableau(std::string name, const std::vector<std::vector<Rational>>& a,
                                        const std::vector<Rational>& b) {
  Matrix<Rational> m(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) m(i, j) = a[i][j];
  return RationalTableau(std::move(name), std::move(m), b);
}

inline FloatTableau float_tableau(std::string name, const std::vector<std::vector<double>>& a,
                                  const std::vector<double>& b) {
  Matrix<double> m(a.size(), a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) m(i, j) = a[i][j];
  return FloatTableau(std::move(name), std::move(m), b);
}

inline Rational q(long n, long d = 1) { return Rational(n, d); }

}  // namespace detail

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {
      "backward-euler", "implicit-midpoint", "trapezoid",       "gauss-2",      "gauss-3",
      "radau-iia-2",    "radau-iia-3",       "sdirk-norsett-3", "classical-rk4"};
  return names;
}

inline ButcherTableau catalog_lookup(const std::string& name) {
  using detail::q;
  if (name == "backward-euler") return detail::rational_tableau(name, {{q(1)}}, {q(1)});
  if (name == "implicit-midpoint") return detail::rational_tableau(name, {{q(1, 2)}}, {q(1)});
  if (name == "trapezoid")
    return detail::rational_tableau(name, {{q(0), q(0)}, {q(1, 2), q(1, 2)}}, {q(1, 2), q(1, 2)});
  if (name == "gauss-2") {
    // Hairer & Wanner, Solving ODEs II, Table IV.5.1.
    const double r = std::sqrt(3.0) / 6.0;
    return detail::float_tableau(name, {{0.25, 0.25 - r}, {0.25 + r, 0.25}}, {0.5, 0.5});
  }
  if (name == "gauss-3") {
    // Hairer & Wanner II, Table IV.5.2.
    const double r = std::sqrt(15.0);
    return detail::float_tableau(name,
                                 {{5.0 / 36.0, 2.0 / 9.0 - r / 15.0, 5.0 / 36.0 - r / 30.0},
                                  {5.0 / 36.0 + r / 24.0, 2.0 / 9.0, 5.0 / 36.0 - r / 24.0},
                                  {5.0 / 36.0 + r / 30.0, 2.0 / 9.0 + r / 15.0, 5.0 / 36.0}},
                                 {5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0});
  }
  if (name == "radau-iia-2") {
    // Hairer & Wanner II, Table IV.5.5.
    return detail::rational_tableau(name, {{q(5, 12), q(-1, 12)}, {q(3, 4), q(1, 4)}}, {q(3, 4), q(1, 4)});
  }
  if (name == "radau-iia-3") {
    // Hairer & Wanner II, Table IV.5.6.
    const double r = std::sqrt(6.0);
    const std::vector<double> last = {(16.0 - r) / 36.0, (16.0 + r) / 36.0, 1.0 / 9.0};
    return detail::float_tableau(name,
                                 {{(88.0 - 7.0 * r) / 360.0, (296.0 - 169.0 * r) / 1800.0, (-2.0 + 3.0 * r) / 225.0},
                                  {(296.0 + 169.0 * r) / 1800.0, (88.0 + 7.0 * r) / 360.0, (-2.0 - 3.0 * r) / 225.0},
                                  last},
                                 last);
  }
  if (name == "sdirk-norsett-3") {
    // Three-stage SDIRK of order 4 (Norsett 1974; Hairer & Wanner II,
    // Table IV.6.4 with the A-stable root gamma = 1/2 + cos(pi/18)/sqrt(3)).
    const double g = 0.5 + std::cos(std::numbers::pi / 18.0) / std::sqrt(3.0);
    const double d = 1.0 / (6.0 * (2.0 * g - 1.0) * (2.0 * g - 1.0));
    return detail::float_tableau(name, {{g, 0.0, 0.0}, {0.5 - g, g, 0.0}, {2.0 * g, 1.0 - 4.0 * g, g}},
                                 {d, 1.0 - 2.0 * d, d});
  }
  if (name == "classical-rk4") {
    return detail::rational_tableau(name,
                                    {{q(0), q(0), q(0), q(0)},
                                     {q(1, 2), q(0), q(0), q(0)},
                                     {q(0), q(1, 2), q(0), q(0)},
                                     {q(0), q(0), q(1), q(0)}},
                                    {q(1, 6), q(1, 3), q(1, 3), q(1, 6)});
  }
  std::string known;
  for (const auto& n : catalog_names()) known += (known.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown tableau \"" + name + "\" (known: " + known + ")");
}

}  // namespace slrk
