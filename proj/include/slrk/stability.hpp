#pragma once

// Linear stability: R(z), the A/AS/ASI checks, the R-condition for
// superconvergence, logarithmic norms, and a Kronecker-form probe of the
// matrix-valued bound sup ||(I - zA)^{-1}|| over the closed left half-plane.
//
// Boundary quantities are sampled on z = i tan(theta/2), theta in (-pi, pi),
// which is the image of the unit circle under z = (w - 1)/(w + 1); theta = pi
// is z = infinity and is evaluated from leading coefficients.

#include "slrk/polynomial.hpp"
#include "slrk/tableau.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slrk {

enum class Verdict { holds, fails, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct Witness {
  Complex z;
  bool at_infinity = false;
  double value = 0.0;  // +inf marks a pole
  std::string reason;
};

struct CheckResult {
  Verdict verdict = Verdict::inconclusive;
  std::optional<Witness> witness;
  /// Sampled boundary supremum of the checked quantity (|R|, or a norm).
  double sup = 0.0;
  Complex argmax;
  bool argmax_at_infinity = false;
  std::size_t samples = 0;
  std::string note;
};

struct StabilityConfig {
  std::size_t samples = 4096;
  /// |R| <= 1 + hold_slack counts as bounded by one.
  double hold_slack = 1e-12;
  /// Values in (1 + hold_slack, 1 + fail_slack] are inconclusive.
  double fail_slack = 1e-9;
  /// Roots or poles within this distance of the imaginary axis are inconclusive.
  double axis_guard = 1e-9;
  /// Relative size under which a leading float coefficient is treated as zero.
  double degree_tol = 1e-12;
};

template <class T>
struct RationalFunction {
  Polynomial<T> num;
  Polynomial<T> den;

  Complex operator()(Complex z) const { return num(z) / den(z); }
};

/// R(z) = 1 + z b^T (I - zA)^{-1} 1 as num/den with den = det(I - zA) and
/// num = den + z b^T adj(I - zA) 1.
template <class T>
RationalFunction<T> stability_function(const BasicTableau<T>& tab) {
  const auto fl = faddeev_leverrier(tab.A());
  const std::size_t s = tab.stages();
  std::vector<T> tail;
  for (const auto& m : fl.adj) tail.push_back(dot(tab.b(), m * Vec<T>(s, from_int<T>(1))));
  return {fl.den + Polynomial<T>(tail).shifted(1), fl.den};
}

namespace detail {

/// Max of f over the sampled imaginary axis plus a refined local search.
struct AxisMax {
  double value = 0.0;
  Complex z;
  bool at_infinity = false;
};

inline AxisMax sample_axis(const std::function<double(Complex)>& f, double at_infinity, std::size_t n) {
  AxisMax best;
  best.value = at_infinity;
  best.at_infinity = true;
  const double pi = std::numbers::pi;
  auto theta_to_z = [](double th) { return Complex(0.0, std::tan(0.5 * th)); };
  std::size_t best_j = n;
  for (std::size_t j = 0; j < n; ++j) {
    const double th = -pi + pi / static_cast<double>(n) + 2.0 * pi * static_cast<double>(j) / static_cast<double>(n);
    const double v = f(theta_to_z(th));
    if (v > best.value || std::isnan(v)) {
      best = {v, theta_to_z(th), false};
      best_j = j;
    }
  }
  if (best_j < n) {
    // golden-section refinement inside the neighbouring cells
    const double step = 2.0 * pi / static_cast<double>(n);
    const double center = -pi + pi / static_cast<double>(n) + step * static_cast<double>(best_j);
    double lo = std::max(center - step, -pi + 1e-12), hi = std::min(center + step, pi - 1e-12);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = f(theta_to_z(x1)), f2 = f(theta_to_z(x2));
    for (int it = 0; it < 80; ++it) {
      if (f1 > f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = f(theta_to_z(x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = f(theta_to_z(x2));
      }
    }
    if (f1 > best.value) best = {f1, theta_to_z(x1), false};
    if (f2 > best.value) best = {f2, theta_to_z(x2), false};
  }
  return best;
}

inline Eigen::MatrixXcd complex_resolvent(const Matrix<double>& a, Complex z) {
  const Eigen::Index s = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) m(i, j) -= z * a(i, j);
  return m;
}

inline double spectral_norm(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

/// ||(I - zA)^{-1}||_2.
inline double resolvent_norm(const Matrix<double>& a, Complex z) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(complex_resolvent(a, z));
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  return smin == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / smin;
}

/// ||z b^T (I - zA)^{-1}||_2.
inline double as_norm(const Matrix<double>& a, const Vec<double>& b, Complex z) {
  const Eigen::Index s = static_cast<Eigen::Index>(b.size());
  Eigen::VectorXcd bb(s);
  for (Eigen::Index i = 0; i < s; ++i) bb(i) = b[i];
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(complex_resolvent(a, z).transpose());
  return std::abs(z) * (lu.solve(bb)).norm();
}

/// Degree-aware limit of p(z)/den(z) as z -> infinity; +inf if p dominates.
template <class T>
double ratio_at_infinity(const Polynomial<T>& p, const Polynomial<T>& den, double tol) {
  const int dp = p.degree(tol), dd = den.degree(tol);
  if (dp < dd) return 0.0;
  if (dp > dd) return std::numeric_limits<double>::infinity();
  return to_double(p.coeff(dp)) / to_double(den.coeff(dd));
}

/// First point on z = -t (t from 1e-3 to 1e6) where `f` exceeds `bound`.
inline std::optional<Witness> real_axis_witness(const std::function<double(Complex)>& f, double bound,
                                                const std::string& reason) {
  for (int k = 0; k <= 900; ++k) {
    const double t = std::pow(10.0, -3.0 + 9.0 * k / 900.0);
    const double v = f(Complex(-t, 0.0));
    if (v > bound) return Witness{Complex(-t, 0.0), false, v, reason};
  }
  return std::nullopt;
}

}  // namespace detail

/// Poles z = 1/lambda of (I - zA)^{-1} in the closed left half-plane.
inline CheckResult pole_check(const Matrix<double>& a, const StabilityConfig& cfg) {
  CheckResult r;
  r.verdict = Verdict::holds;
  const Eigen::Index s = static_cast<Eigen::Index>(a.rows());
  Eigen::MatrixXd m(s, s);
  double scale = 0.0;
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j) {
      m(i, j) = a(i, j);
      scale = std::max(scale, std::abs(a(i, j)));
    }
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  for (Eigen::Index i = 0; i < s; ++i) {
    const Complex lam = es.eigenvalues()(i);
    if (std::abs(lam) <= 1e-12 * std::max(1.0, scale)) continue;
    const Complex pole = 1.0 / lam;
    if (pole.real() < -cfg.axis_guard) {
      r.verdict = Verdict::fails;
      r.witness = Witness{pole, false, std::numeric_limits<double>::infinity(), "pole of (I - zA)^{-1} with Re z < 0"};
      return r;
    }
    if (pole.real() <= cfg.axis_guard && r.verdict == Verdict::holds) {
      r.verdict = Verdict::inconclusive;
      r.witness = Witness{pole, false, std::numeric_limits<double>::infinity(), "pole within the axis guard band"};
    }
  }
  return r;
}

template <class T>
CheckResult check_A_stability(const BasicTableau<T>& tab, const StabilityConfig& cfg = {}) {
  const auto R = stability_function(tab);
  auto absR = [&](Complex z) { return std::abs(R(z)); };
  CheckResult r;
  // poles of R that are not cancelled by the numerator
  for (const auto& z : roots(R.den)) {
    if (std::abs(R.num(z)) <= 1e-8 * (1.0 + std::abs(R.den.to_float()(z)))) continue;
    if (z.real() < -cfg.axis_guard) {
      r.verdict = Verdict::fails;
      r.witness = Witness{z, false, std::numeric_limits<double>::infinity(), "pole of R with Re z < 0"};
      return r;
    }
    if (z.real() <= cfg.axis_guard) {
      r.verdict = Verdict::inconclusive;
      r.witness = Witness{z, false, std::numeric_limits<double>::infinity(), "pole of R within the axis guard band"};
      r.note = "pole near the imaginary axis";
      return r;
    }
  }
  const double r_inf = std::abs(detail::ratio_at_infinity(R.num, R.den, cfg.degree_tol));
  const auto best = detail::sample_axis(absR, r_inf, cfg.samples);
  r.sup = best.value;
  r.argmax = best.z;
  r.argmax_at_infinity = best.at_infinity;
  r.samples = cfg.samples + 1;
  if (best.value <= 1.0 + cfg.hold_slack) {
    r.verdict = Verdict::holds;
  } else if (best.value <= 1.0 + cfg.fail_slack) {
    r.verdict = Verdict::inconclusive;
    r.witness = Witness{best.z, best.at_infinity, best.value, "boundary |R| marginally above 1"};
  } else {
    r.verdict = Verdict::fails;
    r.witness = detail::real_axis_witness(absR, 1.0 + cfg.fail_slack, "|R(z)| > 1 on the negative real axis");
    if (!r.witness) r.witness = Witness{best.z, best.at_infinity, best.value, "|R(z)| > 1 on the imaginary axis"};
  }
  return r;
}

template <class T>
CheckResult check_ASI_stability(const BasicTableau<T>& tab, const StabilityConfig& cfg = {}) {
  const auto fa = tab.to_float();
  CheckResult r = pole_check(fa.A(), cfg);
  if (r.verdict == Verdict::fails) return r;
  const auto fl = faddeev_leverrier(tab.A());
  const std::size_t s = tab.stages();
  // (I - zA)^{-1} -> L as z -> infinity, entrywise from leading coefficients
  Eigen::MatrixXcd limit(s, s);
  bool unbounded = false;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) {
      const double v = detail::ratio_at_infinity(fl.adj_entry(i, j), fl.den, cfg.degree_tol);
      unbounded = unbounded || std::isinf(v);
      limit(i, j) = std::isinf(v) ? 0.0 : v;
    }
  auto norm = [&](Complex z) { return detail::resolvent_norm(fa.A(), z); };
  if (unbounded) {
    r.verdict = Verdict::fails;
    r.sup = std::numeric_limits<double>::infinity();
    r.argmax_at_infinity = true;
    r.witness = Witness{Complex(-1e3, 0.0), false, norm(Complex(-1e3, 0.0)),
                        "(I - zA)^{-1} grows without bound as z -> infinity"};
    return r;
  }
  const auto best = detail::sample_axis(norm, detail::spectral_norm(limit), cfg.samples);
  r.sup = best.value;
  r.argmax = best.z;
  r.argmax_at_infinity = best.at_infinity;
  r.samples = cfg.samples + 1;
  if (!std::isfinite(best.value)) {
    r.verdict = Verdict::inconclusive;
    r.witness = Witness{best.z, best.at_infinity, best.value, "singular resolvent on the imaginary axis"};
  }
  r.note = "interior bound relies on the maximum principle";
  return r;
}

template <class T>
CheckResult check_AS_stability(const BasicTableau<T>& tab, const StabilityConfig& cfg = {}) {
  const auto fa = tab.to_float();
  const auto fl = faddeev_leverrier(tab.A());
  const auto row = fl.row_times_adj(tab.b());
  CheckResult r;
  r.verdict = Verdict::holds;
  // poles of z b^T (I - zA)^{-1}: roots of den not cancelled by every column
  for (const auto& z : roots(fl.den)) {
    bool cancelled = true;
    for (const auto& p : row) cancelled = cancelled && std::abs(p(z)) <= 1e-8;
    if (cancelled) continue;
    if (z.real() < -cfg.axis_guard) {
      r.verdict = Verdict::fails;
      r.witness = Witness{z, false, std::numeric_limits<double>::infinity(), "pole with Re z < 0"};
      return r;
    }
    if (z.real() <= cfg.axis_guard) {
      r.verdict = Verdict::inconclusive;
      r.witness = Witness{z, false, std::numeric_limits<double>::infinity(), "pole within the axis guard band"};
    }
  }
  Eigen::VectorXd limit(tab.stages());
  bool unbounded = false;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double v = detail::ratio_at_infinity(row[j].shifted(1), fl.den, cfg.degree_tol);
    unbounded = unbounded || std::isinf(v);
    limit(static_cast<Eigen::Index>(j)) = std::isinf(v) ? 0.0 : v;
  }
  auto norm = [&](Complex z) { return detail::as_norm(fa.A(), fa.b(), z); };
  if (unbounded) {
    r.verdict = Verdict::fails;
    r.sup = std::numeric_limits<double>::infinity();
    r.argmax_at_infinity = true;
    r.witness = Witness{Complex(-1e3, 0.0), false, norm(Complex(-1e3, 0.0)),
                        "z b^T (I - zA)^{-1} grows without bound as z -> infinity"};
    return r;
  }
  const auto best = detail::sample_axis(norm, limit.norm(), cfg.samples);
  r.sup = best.value;
  r.argmax = best.z;
  r.argmax_at_infinity = best.at_infinity;
  r.samples = cfg.samples + 1;
  if (!std::isfinite(best.value) && r.verdict == Verdict::holds) {
    r.verdict = Verdict::inconclusive;
    r.witness = Witness{best.z, best.at_infinity, best.value, "singular resolvent on the imaginary axis"};
  }
  r.note = "interior bound relies on the maximum principle";
  return r;
}

/// R-condition: R(infinity) != 1 and (1 - R(z))/z = -b^T adj(I - zA) 1 / det(I - zA)
/// has no zeros with Re z <= 0.
template <class T>
CheckResult check_R_condition(const BasicTableau<T>& tab, const StabilityConfig& cfg = {}) {
  const auto R = stability_function(tab);
  const auto fl = faddeev_leverrier(tab.A());
  CheckResult r;
  r.verdict = Verdict::holds;
  const int dn = R.num.degree(cfg.degree_tol), dd = R.den.degree(cfg.degree_tol);
  if (dn == dd) {
    const T lim = R.num.coeff(dn) / R.den.coeff(dd);
    const double gap = magnitude(lim - from_int<T>(1));
    if (is_rational_v<T> ? gap == 0.0 : gap <= cfg.hold_slack) {
      r.verdict = Verdict::fails;
      r.witness = Witness{Complex(), true, to_double(lim), "R(infinity) = 1"};
      return r;
    }
    if (!is_rational_v<T> && gap <= cfg.fail_slack) {
      r.verdict = Verdict::inconclusive;
      r.witness = Witness{Complex(), true, to_double(lim), "R(infinity) within 1e-9 of 1"};
    }
  }
  const std::size_t s = tab.stages();
  std::vector<T> tail;
  for (const auto& m : fl.adj) tail.push_back(dot(tab.b(), m * Vec<T>(s, from_int<T>(1))));
  const Polynomial<T> numer(tail);
  if (numer.degree(cfg.degree_tol) < 0) {
    r.verdict = Verdict::fails;
    r.witness = Witness{Complex(), false, 0.0, "(1 - R(z))/z vanishes identically"};
    return r;
  }
  for (const auto& z : roots(numer, cfg.degree_tol)) {
    if (std::abs(R.den(z)) <= 1e-8) continue;  // cancelled against a pole
    if (z.real() < -cfg.axis_guard) {
      r.verdict = Verdict::fails;
      r.witness = Witness{z, false, 0.0, "(1 - R(z))/z has a zero with Re z < 0"};
      return r;
    }
    if (z.real() <= cfg.axis_guard) {
      r.verdict = Verdict::inconclusive;
      r.witness = Witness{z, false, 0.0, "zero of (1 - R(z))/z within the axis guard band"};
    }
  }
  return r;
}

struct StabilityReport {
  CheckResult a_stable, as_stable, asi_stable, r_condition;
  /// R(infinity); nullopt when R is unbounded at infinity.
  std::optional<double> r_at_infinity;
  std::vector<std::string> r_numerator, r_denominator;
};

template <class T>
StabilityReport analyze_stability(const BasicTableau<T>& tab, const StabilityConfig& cfg = {}) {
  StabilityReport rep;
  rep.a_stable = check_A_stability(tab, cfg);
  rep.as_stable = check_AS_stability(tab, cfg);
  rep.asi_stable = check_ASI_stability(tab, cfg);
  rep.r_condition = check_R_condition(tab, cfg);
  const auto R = stability_function(tab);
  const double inf = detail::ratio_at_infinity(R.num, R.den, cfg.degree_tol);
  if (!std::isinf(inf)) rep.r_at_infinity = inf;
  for (const auto& c : R.num.coeffs()) rep.r_numerator.push_back(format_scalar(c));
  for (const auto& c : R.den.coeffs()) rep.r_denominator.push_back(format_scalar(c));
  return rep;
}

/// Largest eigenvalue of the symmetric part of M.
inline double log_norm(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("log_norm needs a square matrix");
  if (m.rows() == 0) return 0.0;
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// I - A (x) Z as a dense sN x sN matrix.
inline Eigen::MatrixXd kron_stage_matrix(const Matrix<double>& a, const Eigen::MatrixXd& z) {
  const Eigen::Index s = static_cast<Eigen::Index>(a.rows()), n = z.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(s * n, s * n);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      if (a(i, j) != 0.0) m.block(i * n, j * n, n, n) -= a(i, j) * z;
  return m;
}

struct NevanlinnaResult {
  double kron_norm = 0.0;
  double boundary_sup = 0.0;
  bool holds = false;
};

/// Compares ||(I - A (x) Z)^{-1}|| with the sampled sup of ||(I - zA)^{-1}||
/// for a dissipative Z. `boundary_sup` is taken from the ASI check.
inline NevanlinnaResult nevanlinna_probe(const FloatTableau& tab, const Eigen::MatrixXd& z, double boundary_sup,
                                         double slack = 1e-6) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(kron_stage_matrix(tab.A(), z));
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) throw std::runtime_error("I - A (x) Z is singular");
  NevanlinnaResult r;
  r.kron_norm = 1.0 / smin;
  r.boundary_sup = boundary_sup;
  r.holds = r.kron_norm <= boundary_sup + slack;
  return r;
}

inline NevanlinnaResult nevanlinna_probe(const FloatTableau& tab, const Eigen::MatrixXd& z) {
  if (log_norm(z) > 1e-12) throw std::invalid_argument("nevanlinna_probe needs log_norm(Z) <= 0");
  const auto asi = check_ASI_stability(tab);
  if (asi.verdict == Verdict::fails) throw std::invalid_argument("tableau is not ASI-stable");
  return nevanlinna_probe(tab, z, asi.sup);
}

}  // namespace slrk
