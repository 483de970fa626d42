#pragma once

// Dense univariate polynomials (ascending coefficients) and the
// Faddeev-LeVerrier expansion of det(I - zA) and adj(I - zA).

#include "slrk/dense.hpp"
#include "slrk/scalar.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <vector>

namespace slrk {

using Complex = std::complex<double>;

template <class T>
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<T> coeffs) : c_(std::move(coeffs)) { trim(); }

  /// Drops exactly-zero leading coefficients. Float polynomials keep tiny ones;
  /// use `degree(tol)` for a tolerance-aware degree.
  void trim() {
    while (!c_.empty() && c_.back() == from_int<T>(0)) c_.pop_back();
  }

  const std::vector<T>& coeffs() const { return c_; }
  bool is_zero() const { return c_.empty(); }

  /// Degree with coefficients below rel_tol * max|coeff| treated as zero.
  /// The zero polynomial has degree -1.
  int degree(double rel_tol = 0.0) const {
    double scale = 0.0;
    for (const auto& x : c_) scale = std::max(scale, magnitude(x));
    for (int k = static_cast<int>(c_.size()) - 1; k >= 0; --k)
      if (magnitude(c_[k]) > rel_tol * scale) return k;
    return -1;
  }

  T coeff(int k) const { return k >= 0 && k < static_cast<int>(c_.size()) ? c_[k] : from_int<T>(0); }

  Complex operator()(Complex z) const {
    Complex r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * z + to_double(*it);
    return r;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<T> r(std::max(a.c_.size(), b.c_.size()), from_int<T>(0));
    for (std::size_t i = 0; i < a.c_.size(); ++i) r[i] += a.c_[i];
    for (std::size_t i = 0; i < b.c_.size(); ++i) r[i] += b.c_[i];
    return Polynomial(std::move(r));
  }

  /// Multiplication by z^k.
  Polynomial shifted(int k) const {
    if (c_.empty()) return *this;
    std::vector<T> r(k, from_int<T>(0));
    r.insert(r.end(), c_.begin(), c_.end());
    return Polynomial(std::move(r));
  }

  Polynomial<double> to_float() const {
    std::vector<double> r;
    for (const auto& x : c_) r.push_back(to_double(x));
    return Polynomial<double>(std::move(r));
  }

 private:
  std::vector<T> c_;
};

/// Roots via eigenvalues of the companion matrix, after discarding leading
/// coefficients below rel_tol relative to the largest one.
template <class T>
std::vector<Complex> roots(const Polynomial<T>& p, double rel_tol = 1e-14) {
  const int n = p.degree(rel_tol);
  if (n <= 0) return {};
  const double lead = to_double(p.coeff(n));
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) comp(i, n - 1) = -to_double(p.coeff(i)) / lead;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<Complex> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

/// det(I - zA) = sum_k den[k] z^k and adj(I - zA) = sum_{k>=1} adj[k-1] z^{k-1},
/// obtained from the Faddeev-LeVerrier recursion on A (exact for rationals).
template <class T>
struct ResolventExpansion {
  Polynomial<T> den;
  std::vector<Matrix<T>> adj;  // adj[k] multiplies z^k, k = 0..s-1

  /// Entry (i, j) of adj(I - zA) as a polynomial.
  Polynomial<T> adj_entry(std::size_t i, std::size_t j) const {
    std::vector<T> c;
    for (const auto& m : adj) c.push_back(m(i, j));
    return Polynomial<T>(std::move(c));
  }

  /// w^T adj(I - zA) as polynomials, one per column.
  std::vector<Polynomial<T>> row_times_adj(const Vec<T>& w) const {
    const std::size_t s = w.size();
    std::vector<Polynomial<T>> out;
    for (std::size_t j = 0; j < s; ++j) {
      std::vector<T> c;
      for (const auto& m : adj) {
        T acc = from_int<T>(0);
        for (std::size_t i = 0; i < s; ++i) acc += w[i] * m(i, j);
        c.push_back(acc);
      }
      out.emplace_back(std::move(c));
    }
    return out;
  }
};

template <class T>
ResolventExpansion<T> faddeev_leverrier(const Matrix<T>& a) {
  const std::size_t n = a.rows();
  // characteristic polynomial det(lambda I - A) = sum_k cp[k] lambda^k
  std::vector<T> cp(n + 1, from_int<T>(0));
  cp[n] = from_int<T>(1);
  std::vector<Matrix<T>> m(n + 1);
  Matrix<T> prev(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    Matrix<T> cur = a * prev;
    for (std::size_t i = 0; i < n; ++i) cur(i, i) += cp[n - k + 1];
    m[k] = cur;
    cp[n - k] = -trace(a * cur) / from_int<T>(static_cast<std::int64_t>(k));
    prev = cur;
  }
  ResolventExpansion<T> out;
  std::vector<T> den(n + 1);
  for (std::size_t k = 0; k <= n; ++k) den[n - k] = cp[k];
  out.den = Polynomial<T>(std::move(den));
  for (std::size_t k = 1; k <= n; ++k) out.adj.push_back(m[k]);
  return out;
}

}  // namespace slrk
