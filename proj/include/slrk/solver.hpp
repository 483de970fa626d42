#pragma once

// Constant-step Runge-Kutta integration of y' = J y + g(y) + r(t).
//
// DIRK tableaux are solved stage by stage with simplified Newton; other
// implicit tableaux use block Newton on the stacked sN system. Stage
// derivatives are recovered from the converged stage values instead of
// re-evaluating J*Y, which would multiply round-off by |h*lambda|.

#include "slrk/problems.hpp"
#include "slrk/stability.hpp"
#include "slrk/tableau.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slrk {

enum class JacobianMode { analytic, finite_difference };

struct NewtonConfig {
  /// Absolute tolerance on the Newton increment, scaled by sqrt(N).
  double atol = 1e-12;
  double rtol = 1e-12;
  int max_iterations = 50;
  JacobianMode jacobian = JacobianMode::analytic;
  /// A contraction factor at or above this counts as a stall.
  double stall_rate = 0.9;
  /// After this many stalls the Jacobian is re-evaluated every iteration.
  int stall_limit = 10;
  /// Use the stacked block-Newton solve even for DIRK tableaux.
  bool force_block = false;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, int stage, double residual)
      : std::runtime_error(what), stage_(stage), residual_(residual) {}
  int stage() const { return stage_; }
  double residual() const { return residual_; }

 private:
  int stage_;
  double residual_;
};

struct StepResult {
  Vector y_next;
  /// Stacked stage values, s blocks of length N.
  Vector stages;
  /// h * f(t_n + c_i h, Y_i), stacked like `stages`.
  Vector stage_derivatives;
  std::vector<int> iterations;
  std::vector<bool> converged;
  /// Norm of the last Newton increment per stage (one entry for block solves).
  std::vector<double> residuals;

  int total_iterations() const {
    int n = 0;
    for (int k : iterations) n += k;
    return n;
  }
};

namespace detail {

inline DenseMatrix g_jacobian(const SemilinearProblem& p, const Vector& y, JacobianMode mode) {
  if (mode == JacobianMode::analytic && p.g_jacobian) return p.g_jacobian(y);
  const auto n = y.size();
  DenseMatrix m(n, n);
  const Vector g0 = p.g(y);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double e = std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(y(j)));
    Vector yp = y;
    yp(j) += e;
    m.col(j) = (p.g(yp) - g0) / e;
  }
  return m;
}

inline double newton_tolerance(const NewtonConfig& cfg, const Vector& y) {
  return cfg.atol * std::sqrt(static_cast<double>(y.size())) + cfg.rtol * y.norm();
}

/// Solves F(x) = 0 by simplified Newton. `jac(x)` returns dF/dx.
template <class Residual, class Jacobian>
void newton_solve(Vector& x, Residual&& F, Jacobian&& jac, const NewtonConfig& cfg, int stage, int& iterations,
                  double& last) {
  Eigen::PartialPivLU<DenseMatrix> lu(jac(x));
  double prev = std::numeric_limits<double>::infinity();
  int stalls = 0;
  for (iterations = 1; iterations <= cfg.max_iterations; ++iterations) {
    const Vector dx = lu.solve(-F(x));
    if (!dx.allFinite()) throw SolverError("singular or non-finite Newton system at stage " + std::to_string(stage), stage, last);
    x += dx;
    last = dx.norm();
    if (last <= newton_tolerance(cfg, x)) return;
    if (last >= cfg.stall_rate * prev) {
      ++stalls;
      lu.compute(jac(x));
    } else if (stalls >= cfg.stall_limit) {
      lu.compute(jac(x));
    }
    prev = last;
  }
  iterations = cfg.max_iterations;
  throw SolverError("Newton did not converge at stage " + std::to_string(stage) + " (last increment " +
                        std::to_string(last) + ")",
                    stage, last);
}

inline void dirk_step(const FloatTableau& tab, const SemilinearProblem& p, double t, const Vector& y, double h,
                      const NewtonConfig& cfg, StepResult& out) {
  const std::size_t s = tab.stages();
  const auto n = static_cast<Eigen::Index>(p.N);
  const auto I = DenseMatrix::Identity(n, n);
  for (std::size_t i = 0; i < s; ++i) {
    Vector rhs = y;
    for (std::size_t j = 0; j < i; ++j) rhs += tab.A()(i, j) * out.stage_derivatives.segment(j * n, n);
    const double a = tab.A()(i, i);
    const double ti = t + tab.c()[i] * h;
    Vector Y = rhs;
    Vector hf;
    int iters = 0;
    double last = 0.0;
    if (a == 0.0) {
      hf = h * p.f(ti, Y);
    } else {
      const double ha = h * a;
      auto F = [&](const Vector& x) { return Vector(x - rhs - ha * p.f(ti, x)); };
      auto jac = [&](const Vector& x) { return DenseMatrix(I - ha * (p.J + g_jacobian(p, x, cfg.jacobian))); };
      Y = y;
      newton_solve(Y, F, jac, cfg, static_cast<int>(i), iters, last);
      hf = (Y - rhs) / a;
    }
    out.stages.segment(i * n, n) = Y;
    out.stage_derivatives.segment(i * n, n) = hf;
    out.iterations.push_back(iters);
    out.converged.push_back(true);
    out.residuals.push_back(last);
  }
}

inline void explicit_step(const FloatTableau& tab, const SemilinearProblem& p, double t, const Vector& y, double h,
                          StepResult& out) {
  const auto n = static_cast<Eigen::Index>(p.N);
  for (std::size_t i = 0; i < tab.stages(); ++i) {
    Vector Y = y;
    for (std::size_t j = 0; j < i; ++j) Y += tab.A()(i, j) * out.stage_derivatives.segment(j * n, n);
    out.stages.segment(i * n, n) = Y;
    out.stage_derivatives.segment(i * n, n) = h * p.f(t + tab.c()[i] * h, Y);
    out.iterations.push_back(0);
    out.converged.push_back(true);
    out.residuals.push_back(0.0);
  }
}

inline void block_step(const FloatTableau& tab, const SemilinearProblem& p, double t, const Vector& y, double h,
                       const NewtonConfig& cfg, StepResult& out) {
  const std::size_t s = tab.stages();
  const auto n = static_cast<Eigen::Index>(p.N);
  const auto sn = static_cast<Eigen::Index>(s) * n;
  Vector base(sn);
  for (std::size_t i = 0; i < s; ++i) base.segment(i * n, n) = y;
  auto stacked_hf = [&](const Vector& Y) {
    Vector v(sn);
    for (std::size_t i = 0; i < s; ++i) v.segment(i * n, n) = h * p.f(t + tab.c()[i] * h, Y.segment(i * n, n));
    return v;
  };
  auto apply_a = [&](const Vector& X) {
    Vector v = Vector::Zero(sn);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j)
        if (tab.A()(i, j) != 0.0) v.segment(i * n, n) += tab.A()(i, j) * X.segment(j * n, n);
    return v;
  };
  auto F = [&](const Vector& Y) { return Vector(Y - base - apply_a(stacked_hf(Y))); };
  auto jac = [&](const Vector& Y) {
    DenseMatrix m = DenseMatrix::Identity(sn, sn);
    for (std::size_t j = 0; j < s; ++j) {
      const DenseMatrix block = h * (p.J + g_jacobian(p, Y.segment(j * n, n), cfg.jacobian));
      for (std::size_t i = 0; i < s; ++i)
        if (tab.A()(i, j) != 0.0) m.block(i * n, j * n, n, n) -= tab.A()(i, j) * block;
    }
    return m;
  };
  Vector Y = base;
  int iters = 0;
  double last = 0.0;
  newton_solve(Y, F, jac, cfg, -1, iters, last);
  out.stages = Y;

  // h F = (A^{-1} (x) I)(Y - 1 (x) y) when A is invertible
  Eigen::MatrixXd a(s, s);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) a(i, j) = tab.A()(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> alu(a);
  if (alu.isInvertible()) {
    const Eigen::MatrixXd ainv = alu.inverse();
    const Vector d = Y - base;
    out.stage_derivatives = Vector::Zero(sn);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) out.stage_derivatives.segment(i * n, n) += ainv(i, j) * d.segment(j * n, n);
  } else {
    out.stage_derivatives = stacked_hf(Y);
  }
  out.iterations.push_back(iters);
  out.converged.push_back(true);
  out.residuals.push_back(last);
}

}  // namespace detail

/// One step from (t, y) with step size h.
inline StepResult rk_step(const FloatTableau& tab, const SemilinearProblem& p, double t, const Vector& y, double h,
                          const NewtonConfig& cfg = {}) {
  if (h < 0.0) throw std::invalid_argument("step size must be nonnegative");
  if (cfg.max_iterations < 1 || cfg.atol <= 0.0 || cfg.rtol <= 0.0)
    throw std::invalid_argument("Newton tolerances must be positive and max_iterations >= 1");
  const std::size_t s = tab.stages();
  const auto n = static_cast<Eigen::Index>(p.N);
  StepResult out;
  out.stages = Vector::Zero(static_cast<Eigen::Index>(s) * n);
  out.stage_derivatives = Vector::Zero(static_cast<Eigen::Index>(s) * n);
  if (h == 0.0) {
    for (std::size_t i = 0; i < s; ++i) out.stages.segment(i * n, n) = y;
    out.y_next = y;
    out.iterations.assign(s, 0);
    out.converged.assign(s, true);
    out.residuals.assign(s, 0.0);
    return out;
  }
  switch (tab.structure()) {
    case Structure::explicit_method: detail::explicit_step(tab, p, t, y, h, out); break;
    case Structure::dirk:
      if (cfg.force_block)
        detail::block_step(tab, p, t, y, h, cfg, out);
      else
        detail::dirk_step(tab, p, t, y, h, cfg, out);
      break;
    case Structure::fully_implicit: detail::block_step(tab, p, t, y, h, cfg, out); break;
  }
  out.y_next = y;
  for (std::size_t i = 0; i < s; ++i) out.y_next += tab.b()[i] * out.stage_derivatives.segment(i * n, n);
  return out;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  /// Newton iterations spent on the step that produced states[k] (0 for k = 0).
  std::vector<int> newton_iterations;

  int total_newton() const {
    int n = 0;
    for (int k : newton_iterations) n += k;
    return n;
  }
};

/// Number of steps of size h in [t0, tf]; throws unless (tf - t0)/h is an
/// integer to within half an ulp.
inline long step_count(double t0, double tf, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("step size must be positive");
  if (tf < t0) throw std::invalid_argument("tf must not precede t0");
  const double q = (tf - t0) / h;
  const double n = std::round(q);
  const double half_ulp = 0.5 * (std::nextafter(std::max(n, 1.0), std::numeric_limits<double>::infinity()) - std::max(n, 1.0));
  if (std::abs(q - n) > half_ulp && n * h != tf - t0)
    throw std::invalid_argument("interval length is not a whole number of steps (ratio " + std::to_string(q) + ")");
  return static_cast<long>(n);
}

/// Constant-step integration from the exact initial value y(t0).
inline Trajectory integrate(const FloatTableau& tab, const SemilinearProblem& p, double t0, double tf, double h,
                            const NewtonConfig& cfg = {}, const Vector* y0 = nullptr) {
  Trajectory tr;
  Vector y = y0 ? *y0 : p.y(t0);
  tr.times.push_back(t0);
  tr.states.push_back(y);
  tr.newton_iterations.push_back(0);
  if (tf == t0) return tr;
  const long steps = step_count(t0, tf, h);
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    StepResult st;
    try {
      st = rk_step(tab, p, t, y, h, cfg);
    } catch (const SolverError& e) {
      throw SolverError(std::string(e.what()) + " in step " + std::to_string(k), e.stage(), e.residual());
    }
    y = st.y_next;
    tr.times.push_back(k + 1 == steps ? tf : t0 + static_cast<double>(k + 1) * h);
    tr.states.push_back(y);
    tr.newton_iterations.push_back(st.total_iterations());
  }
  return tr;
}

/// y(t0 + h) - y_1 with y_0 = y(t0).
inline Vector one_step_error(const FloatTableau& tab, const SemilinearProblem& p, double t0, double h,
                             const NewtonConfig& cfg = {}) {
  return p.y(t0 + h) - rk_step(tab, p, t0, p.y(t0), h, cfg).y_next;
}

/// R(Z) d = d + (b^T (x) Z)(I - A (x) Z)^{-1}(1 (x) d) by a dense solve.
inline Vector apply_stability_matrix(const FloatTableau& tab, const DenseMatrix& Z, const Vector& d) {
  const std::size_t s = tab.stages();
  const auto n = Z.rows();
  const DenseMatrix M = kron_stage_matrix(tab.A(), Z);
  Vector rhs(static_cast<Eigen::Index>(s) * n);
  for (std::size_t i = 0; i < s; ++i) rhs.segment(i * n, n) = d;
  const Vector X = M.partialPivLu().solve(rhs);
  Vector sum = Vector::Zero(n);
  for (std::size_t i = 0; i < s; ++i) sum += tab.b()[i] * X.segment(i * n, n);
  return d + Z * sum;
}

/// ||(y_{n+1} - y~_{n+1}) - R(Z)(y_n - y~_n)|| / (h ||y_n - y~_n||) with Z = hJ.
inline double c_stability_probe(const FloatTableau& tab, const SemilinearProblem& p, double t, const Vector& y,
                                const Vector& y_tilde, double h, const NewtonConfig& cfg = {}) {
  const Vector d = y - y_tilde;
  if (d.norm() == 0.0) throw std::invalid_argument("c_stability_probe needs distinct initial values");
  const Vector d1 = rk_step(tab, p, t, y, h, cfg).y_next - rk_step(tab, p, t, y_tilde, h, cfg).y_next;
  const Vector lin = apply_stability_matrix(tab, h * p.J, d);
  return (d1 - lin).norm() / (h * d.norm());
}

/// Writes "t,y1,...,yN,newton" rows.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t";
  const auto n = tr.states.empty() ? 0 : tr.states.front().size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",y" << (i + 1);
  os << ",newton\n";
  char buf[64];
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.times[k]);
    os << buf;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", tr.states[k](i));
      os << buf;
    }
    os << "," << tr.newton_iterations[k] << "\n";
  }
}

}  // namespace slrk
