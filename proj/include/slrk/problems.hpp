#pragma once

// Semilinear test problems y' = J y + g(y) + r(t) with manufactured
// solutions. All built-in nonlinearities act componentwise, so the k-linear
// derivative g^{(k)}(y)[u_1..u_k] is phi_i^{(k)}(y_i) * prod_j u_{j,i}.

#include "slrk/stability.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace slrk {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct SemilinearProblem {
  std::string name;
  double lambda = -1.0;
  std::size_t N = 1;
  DenseMatrix J;
  /// k-linear directional derivative g^{(k)}(y)[u_1, ..., u_k]; k = 0 is g(y).
  std::function<Vector(int k, const Vector& y, const std::vector<Vector>& u)> g_derivative;
  /// Jacobian g'(y).
  std::function<DenseMatrix(const Vector& y)> g_jacobian;
  /// r(t); may be empty (zero forcing).
  std::function<Vector(double t)> forcing;
  /// y^{(k)}(t) of the manufactured solution, k = 0..smoothness+1.
  std::function<Vector(int k, double t)> exact;
  /// Highest available derivative order of g.
  int smoothness = 5;
  double lipschitz = 0.0;
  double mu = 0.0;
  double t0 = 0.0;
  double tf = 1.0;

  Vector g(const Vector& y) const { return g_derivative(0, y, {}); }
  Vector r(double t) const { return forcing ? forcing(t) : Vector::Zero(static_cast<Eigen::Index>(N)); }
  Vector f(double t, const Vector& y) const { return J * y + g(y) + r(t); }
  Vector y(double t, int k = 0) const {
    if (k < 0 || k > smoothness + 1) throw std::out_of_range("exact solution derivative " + std::to_string(k) + " not available");
    return exact(k, t);
  }
};

struct ProblemInstance {
  std::string name;
  double lambda = -1.0;
  std::size_t N = 1;
  double t0 = 0.0;
  double tf = 1.0;
};

inline ProblemInstance describe(const SemilinearProblem& p) { return {p.name, p.lambda, p.N, p.t0, p.tf}; }

namespace detail {

/// d^k/dt^k cos(t) and sin(t).
inline double sin_derivative(int k, double t) {
  switch (((k % 4) + 4) % 4) {
    case 0: return std::sin(t);
    case 1: return std::cos(t);
    case 2: return -std::sin(t);
    default: return -std::cos(t);
  }
}
inline double cos_derivative(int k, double t) { return sin_derivative(k + 1, t); }

/// Componentwise nonlinearity from scalar derivative functions phi(i, k, x).
inline void set_componentwise(SemilinearProblem& p, std::function<double(std::size_t, int, double)> phi) {
  const std::size_t n = p.N;
  const int max_k = p.smoothness;
  p.g_derivative = [phi, n, max_k](int k, const Vector& y, const std::vector<Vector>& u) {
    if (k < 0 || k > max_k) throw std::out_of_range("g derivative of order " + std::to_string(k) + " not available");
    if (static_cast<int>(u.size()) != k) throw std::invalid_argument("g_derivative needs exactly k directions");
    Vector out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double v = phi(i, k, y(static_cast<Eigen::Index>(i)));
      for (const auto& d : u) v *= d(static_cast<Eigen::Index>(i));
      out(static_cast<Eigen::Index>(i)) = v;
    }
    return out;
  };
  p.g_jacobian = [phi, n](const Vector& y) {
    DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = phi(i, 1, y(static_cast<Eigen::Index>(i)));
    return m;
  };
}

/// Forcing that makes `exact` a solution.
inline void manufacture_forcing(SemilinearProblem& p) {
  const DenseMatrix J = p.J;
  auto exact = p.exact;
  auto gd = p.g_derivative;
  p.forcing = [J, exact, gd](double t) {
    const Vector y = exact(0, t);
    return Vector(exact(1, t) - J * y - gd(0, y, {}));
  };
}

/// k-th derivative of x^2 / (1 + x^2), k <= 5.
inline double rational_bump_derivative(int k, double x) {
  const double w = 1.0 + x * x, x2 = x * x;
  switch (k) {
    case 0: return x2 / w;
    case 1: return 2.0 * x / (w * w);
    case 2: return (2.0 - 6.0 * x2) / (w * w * w);
    case 3: return -24.0 * x * (1.0 - x2) / std::pow(w, 4);
    case 4: return -24.0 * (5.0 * x2 * x2 - 10.0 * x2 + 1.0) / std::pow(w, 5);
    case 5: return 240.0 * x * (3.0 * x2 * x2 - 10.0 * x2 + 3.0) / std::pow(w, 6);
    default: throw std::out_of_range("derivative order above 5");
  }
}

/// C^5 smoothstep S(x) = x^6 sum_{k=0}^5 C(5+k,k) C(11,5-k) (-x)^k on [0,1],
/// as ascending coefficients.
inline const std::vector<double>& smoothstep5() {
  static const std::vector<double> coeffs = [] {
    auto binom = [](int n, int k) {
      double r = 1.0;
      for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
      return r;
    };
    std::vector<double> c(12, 0.0);
    for (int k = 0; k <= 5; ++k) c[6 + k] = binom(5 + k, k) * binom(11, 5 - k) * (k % 2 == 0 ? 1.0 : -1.0);
    return c;
  }();
  return coeffs;
}

inline double poly_derivative(const std::vector<double>& c, int k, double x) {
  double r = 0.0;
  for (int i = static_cast<int>(c.size()) - 1; i >= k; --i) {
    double f = c[i];
    for (int j = 0; j < k; ++j) f *= (i - j);
    r = r * x + f;
  }
  return r;
}

/// k-th derivative of the bump B: 1 on [-2,2], 0 outside [-3,3], C^5.
inline double clip_bump_derivative(int k, double y) {
  const double a = std::abs(y);
  if (a <= 2.0) return k == 0 ? 1.0 : 0.0;
  if (a >= 3.0) return 0.0;
  // B(y) = 1 - S(|y| - 2); d/dy |y| = sign(y)
  const double sign = (y < 0.0 && k % 2 == 1) ? -1.0 : 1.0;
  const double v = poly_derivative(smoothstep5(), k, a - 2.0);
  return k == 0 ? 1.0 - v : -sign * v;
}

/// k-th derivative of y - y^3 B(y).
inline double clipped_cubic_derivative(int k, double y) {
  // derivatives of y^3
  auto cube = [](int j, double x) {
    switch (j) {
      case 0: return x * x * x;
      case 1: return 3.0 * x * x;
      case 2: return 6.0 * x;
      case 3: return 6.0;
      default: return 0.0;
    }
  };
  double prod = 0.0, binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    prod += binom * cube(j, y) * clip_bump_derivative(k - j, y);
    binom = binom * (k - j) / (j + 1);
  }
  const double lin = k == 0 ? y : (k == 1 ? 1.0 : 0.0);
  return lin - prod;
}

}  // namespace detail

/// If mu(J) > 0, moves mu*I from J into g so that the linear part is
/// dissipative. The exact solution and forcing are unchanged.
inline SemilinearProblem shift_to_dissipative(const SemilinearProblem& p) {
  const double mu = log_norm(p.J);
  if (mu <= 0.0) {
    SemilinearProblem q = p;
    q.mu = mu;
    return q;
  }
  SemilinearProblem q = p;
  q.J = p.J - mu * DenseMatrix::Identity(p.J.rows(), p.J.cols());
  auto gd = p.g_derivative;
  q.g_derivative = [gd, mu](int k, const Vector& y, const std::vector<Vector>& u) {
    Vector v = gd(k, y, u);
    if (k == 0) v += mu * y;
    if (k == 1) v += mu * u[0];
    return v;
  };
  auto jac = p.g_jacobian;
  q.g_jacobian = [jac, mu](const Vector& y) {
    DenseMatrix m = jac(y);
    m.diagonal().array() += mu;
    return m;
  };
  q.lipschitz = p.lipschitz + mu;
  q.mu = log_norm(q.J);
  return q;
}

inline const std::vector<std::string>& builtin_problem_names() {
  static const std::vector<std::string> names = {"npr-scalar", "npr-2d", "mol-reaction-diffusion"};
  return names;
}

inline SemilinearProblem builtin_problem(const std::string& name, double lambda) {
  if (!(lambda < 0.0)) throw std::invalid_argument("stiffness parameter lambda must be negative");
  SemilinearProblem p;
  p.name = name;
  p.lambda = lambda;
  if (name == "npr-scalar") {
    p.N = 1;
    p.J = DenseMatrix::Constant(1, 1, lambda);
    detail::set_componentwise(p, [](std::size_t, int k, double x) { return detail::sin_derivative(k, x); });
    p.exact = [](int k, double t) { return Vector::Constant(1, detail::cos_derivative(k, t)); };
    p.lipschitz = 1.0;
  } else if (name == "npr-2d") {
    p.N = 2;
    p.J.resize(2, 2);
    p.J << lambda, 1.0, 0.0, 0.5 * lambda;
    detail::set_componentwise(p, [](std::size_t i, int k, double x) {
      return i == 0 ? detail::rational_bump_derivative(k, x) : detail::sin_derivative(k, x);
    });
    p.exact = [](int k, double t) {
      Vector v(2);
      v << detail::cos_derivative(k, t), detail::sin_derivative(k, t);
      return v;
    };
    // |d/dx x^2/(1+x^2)| <= 3 sqrt(3)/8 < 1 = max |cos|
    p.lipschitz = 1.0;
  } else if (name == "mol-reaction-diffusion") {
    const int n = 50;
    p.N = n;
    // stiffest eigenvalue of (-lambda/4) tridiag(1,-2,1) approaches lambda
    p.J = DenseMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      p.J(i, i) = 0.5 * lambda;
      if (i > 0) p.J(i, i - 1) = -0.25 * lambda;
      if (i + 1 < n) p.J(i, i + 1) = -0.25 * lambda;
    }
    detail::set_componentwise(p, [](std::size_t, int k, double x) { return detail::clipped_cubic_derivative(k, x); });
    Vector shape(n);
    for (int i = 0; i < n; ++i) shape(i) = std::sin(std::numbers::pi * (i + 1) / (n + 1));
    p.exact = [shape](int k, double t) { return Vector(shape * detail::cos_derivative(k, t)); };
    double lip = 0.0;
    for (int j = 0; j <= 7000; ++j) lip = std::max(lip, std::abs(detail::clipped_cubic_derivative(1, -3.5 + 1e-3 * j)));
    p.lipschitz = lip;
  } else {
    std::string known;
    for (const auto& k : builtin_problem_names()) known += (known.empty() ? "" : ", ") + k;
    throw std::invalid_argument("unknown problem \"" + name + "\" (known: " + known + ")");
  }
  detail::manufacture_forcing(p);
  p = shift_to_dissipative(p);
  return p;
}

struct ValidationReport {
  double consistency_residual = 0.0;  // max over samples of |y' - f| / (1 + |y'|)
  double mu = 0.0;
  std::vector<double> derivative_errors;  // relative FD error of g^{(k)}, k = 1..
  double exact_derivative_error = 0.0;  // relative FD error of y^{(k)}, k <= 4
  bool passed = false;
  std::vector<std::string> failures;
};

/// Consistency of the manufactured solution, mu(J) <= 0, and finite-difference
/// checks of g^{(k)} (k <= min(smoothness, 3)) and y^{(k)} (k <= 4).
inline ValidationReport validate(const SemilinearProblem& p) {
  ValidationReport rep;
  const double span = p.tf - p.t0;
  for (int i = 0; i < 20; ++i) {
    const double t = p.t0 + span * i / 19.0;
    const Vector yp = p.y(t, 1);
    rep.consistency_residual =
        std::max(rep.consistency_residual, (yp - p.f(t, p.y(t))).norm() / (1.0 + yp.norm()));
  }
  if (!(rep.consistency_residual <= 1e-10))
    rep.failures.push_back("manufactured solution residual " + std::to_string(rep.consistency_residual));
  rep.mu = log_norm(p.J);
  if (rep.mu > 1e-12) rep.failures.push_back("log_norm(J) = " + std::to_string(rep.mu) + " > 0");

  const auto n = static_cast<Eigen::Index>(p.N);
  const double eps = 1e-5;
  for (int k = 1; k <= std::min(p.smoothness, 3); ++k) {
    double worst = 0.0;
    for (int sample = 0; sample < 5; ++sample) {
      const double t = p.t0 + span * (0.1 + 0.2 * sample);
      const Vector y = p.y(t);
      std::vector<Vector> dirs;
      for (int j = 0; j < k; ++j) {
        Vector u(n);
        for (Eigen::Index i = 0; i < n; ++i) u(i) = std::cos(1.0 + 0.7 * i + 1.3 * j + sample);
        dirs.push_back(u);
      }
      // central difference of g^{(k-1)} in the direction of the last vector
      std::vector<Vector> head(dirs.begin(), dirs.end() - 1);
      const Vector fd = (p.g_derivative(k - 1, y + eps * dirs.back(), head) -
                         p.g_derivative(k - 1, y - eps * dirs.back(), head)) /
                        (2.0 * eps);
      const Vector an = p.g_derivative(k, y, dirs);
      worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
    }
    rep.derivative_errors.push_back(worst);
    if (worst > 1e-6) rep.failures.push_back("g derivative of order " + std::to_string(k) + " disagrees with finite differences");
  }
  for (int k = 1; k <= 4; ++k) {
    const double t = p.t0 + 0.37 * span;
    const Vector fd = (p.y(t + eps, k - 1) - p.y(t - eps, k - 1)) / (2.0 * eps);
    const Vector an = p.y(t, k);
    rep.exact_derivative_error = std::max(rep.exact_derivative_error, (fd - an).norm() / std::max(1.0, an.norm()));
  }
  if (rep.exact_derivative_error > 1e-6) rep.failures.push_back("exact solution derivatives disagree with finite differences");
  rep.passed = rep.failures.empty();
  return rep;
}

}  // namespace slrk
