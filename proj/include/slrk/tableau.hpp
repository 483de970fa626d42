#pragma once

#include "slrk/dense.hpp"
#include "slrk/scalar.hpp"
#include "slrk/trees.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace slrk {

enum class Structure { explicit_method, dirk, fully_implicit };

inline const char* to_string(Structure s) {
  switch (s) {
    case Structure::explicit_method: return "explicit";
    case Structure::dirk: return "DIRK";
    case Structure::fully_implicit: return "fully-implicit";
  }
  return "?";
}

class TableauError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Butcher tableau (A, b, c) over a single scalar type. The abscissae are
/// always c = A*1; a supplied c is only cross-checked.
template <class T>
class BasicTableau {
 public:
  using scalar_type = T;

  BasicTableau(std::string name, Matrix<T> a, Vec<T> b, std::optional<Vec<T>> c = std::nullopt)
      : name_(std::move(name)), a_(std::move(a)), b_(std::move(b)) {
    const std::size_t s = a_.rows();
    if (s == 0) throw TableauError("tableau must have at least one stage");
    if (a_.cols() != s) throw TableauError("A must be square, got " + std::to_string(s) + "x" + std::to_string(a_.cols()));
    if (b_.size() != s)
      throw TableauError("b has " + std::to_string(b_.size()) + " entries, expected " + std::to_string(s));
    c_ = a_ * Vec<T>(s, from_int<T>(1));
    if (c) {
      if (c->size() != s)
        throw TableauError("c has " + std::to_string(c->size()) + " entries, expected " + std::to_string(s));
      for (std::size_t i = 0; i < s; ++i) {
        const bool ok = is_rational_v<T> ? (*c)[i] == c_[i] : magnitude((*c)[i] - c_[i]) <= 1e-14;
        if (!ok)
          throw TableauError("c mismatch at row " + std::to_string(i) + ": supplied " + format_scalar((*c)[i]) +
                             ", A*1 gives " + format_scalar(c_[i]));
      }
    }
    structure_ = classify();
  }

  const std::string& name() const { return name_; }
  std::size_t stages() const { return b_.size(); }
  const Matrix<T>& A() const { return a_; }
  const Vec<T>& b() const { return b_; }
  const Vec<T>& c() const { return c_; }
  Structure structure() const { return structure_; }
  static constexpr Mode mode() { return mode_of<T>(); }

  BasicTableau<double> to_float() const {
    return BasicTableau<double>(name_, to_double(a_), to_double(b_));
  }

 private:
  Structure classify() const {
    bool lower = true, strictly_lower = true;
    for (std::size_t i = 0; i < stages(); ++i)
      for (std::size_t j = i; j < stages(); ++j) {
        if (a_(i, j) == from_int<T>(0)) continue;
        strictly_lower = false;
        if (j > i) lower = false;
      }
    if (strictly_lower) return Structure::explicit_method;
    return lower ? Structure::dirk : Structure::fully_implicit;
  }

  std::string name_;
  Matrix<T> a_;
  Vec<T> b_;
  Vec<T> c_;
  Structure structure_ = Structure::fully_implicit;
};

using RationalTableau = BasicTableau<Rational>;
using FloatTableau = BasicTableau<double>;

/// A tableau in whichever arithmetic mode its entries allow.
class ButcherTableau {
 public:
  ButcherTableau(RationalTableau t) : impl_(std::move(t)) {}
  ButcherTableau(FloatTableau t) : impl_(std::move(t)) {}

  Mode mode() const { return impl_.index() == 0 ? Mode::rational : Mode::floating; }
  const std::string& name() const {
    return std::visit([](const auto& t) -> const std::string& { return t.name(); }, impl_);
  }
  std::size_t stages() const {
    return std::visit([](const auto& t) { return t.stages(); }, impl_);
  }
  Structure structure() const {
    return std::visit([](const auto& t) { return t.structure(); }, impl_);
  }
  FloatTableau to_float() const {
    return std::visit([](const auto& t) { return t.to_float(); }, impl_);
  }
  const RationalTableau* rational() const { return std::get_if<RationalTableau>(&impl_); }

  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), impl_);
  }

 private:
  std::variant<RationalTableau, FloatTableau> impl_;
};

/// Scaled residuals of the simplifying assumptions B(ell) and C(ell).
template <class T>
struct DefectPair {
  int ell = 1;
  T q_hat;
  Vec<T> s_hat;
};

template <class T>
DefectPair<T> defect_pair(const BasicTableau<T>& tab, int ell) {
  if (ell < 1) throw std::invalid_argument("defect index must be >= 1");
  const T fl = factorial<T>(ell);
  const T fl1 = factorial<T>(ell - 1);
  const Vec<T> c_prev = elementwise_power(tab.c(), ell - 1);
  const Vec<T> c_ell = elementwise_power(tab.c(), ell);
  DefectPair<T> d;
  d.ell = ell;
  d.q_hat = from_int<T>(1) / fl - dot(tab.b(), c_prev) / fl1;
  const Vec<T> ac = tab.A() * c_prev;
  d.s_hat.resize(tab.stages());
  for (std::size_t i = 0; i < tab.stages(); ++i) d.s_hat[i] = c_ell[i] / fl - ac[i] / fl1;
  return d;
}

struct OrderProbe {
  int order = 0;
  bool saturated = false;
};

inline constexpr int stage_order_cap = 10;
inline constexpr int classical_order_cap = 5;

/// Largest q with q_hat_k = 0 and s_hat_k = 0 for k = 1..q, capped at 10.
template <class T>
OrderProbe stage_order(const BasicTableau<T>& tab, double tol = default_tol) {
  for (int k = 1; k <= stage_order_cap; ++k) {
    const auto d = defect_pair(tab, k);
    bool ok = is_zero(d.q_hat, tol);
    for (const auto& x : d.s_hat) ok = ok && is_zero(x, tol);
    if (!ok) return {k - 1, false};
  }
  return {stage_order_cap, true};
}

/// Elementary weight vector of a rooted tree: c^l times the Hadamard
/// product of A*Phi(child) over the non-leaf children.
template <class T>
Vec<T> elementary_weights(const BasicTableau<T>& tab, const RootedTree& t) {
  Vec<T> phi = elementwise_power(tab.c(), t.leaves());
  for (const auto& child : t.children()) phi = hadamard(phi, tab.A() * elementary_weights(tab, child));
  return phi;
}

/// b^T Phi(tau) - 1/gamma(tau).
template <class T>
T classical_residual(const BasicTableau<T>& tab, const RootedTree& t) {
  T inv_gamma;
  if constexpr (is_rational_v<T>)
    inv_gamma = 1 / density(t);
  else
    inv_gamma = 1.0 / to_double(density(t));
  return dot(tab.b(), elementary_weights(tab, t)) - inv_gamma;
}

/// Largest p <= 5 such that every classical tree condition through order p holds.
template <class T>
OrderProbe classical_order(const BasicTableau<T>& tab, double tol = default_tol) {
  for (int p = 1; p <= classical_order_cap; ++p)
    for (const auto& t : enumerate_trees(p))
      if (!is_zero(classical_residual(tab, t), tol)) return {p - 1, false};
  return {classical_order_cap, true};
}

}  // namespace slrk
