#pragma once

// Power-series coefficients of the local truncation error in h with Z = hJ
// held fixed: the rooted-tree expansion, the direct coefficient recursion,
// the order-three closed form, and the defects of the exact solution.

#include "slrk/fit.hpp"
#include "slrk/problems.hpp"
#include "slrk/solver.hpp"
#include "slrk/stability.hpp"
#include "slrk/tableau.hpp"
#include "slrk/trees.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slrk {

/// Largest l + k for which the time-differentiated derivative map is built.
inline constexpr int max_time_derivative_total = 4;
inline constexpr int max_lte_order = 5;

/// Coefficients of h^1..h^max_order. step[i-1] is in R^N, stage[i-1] in R^{sN}.
struct LteSeries {
  int max_order = 0;
  std::vector<Vector> step;
  std::vector<Vector> stage;

  const Vector& step_coeff(int i) const { return step.at(static_cast<std::size_t>(i - 1)); }
  const Vector& stage_coeff(int i) const { return stage.at(static_cast<std::size_t>(i - 1)); }

  /// sum_{i<=m} h^i step_coeff(i).
  Vector truncated(double h, int m) const {
    Vector sum = Vector::Zero(step.empty() ? 0 : step.front().size());
    double hp = 1.0;
    for (int i = 1; i <= m; ++i) {
      hp *= h;
      sum += hp * step_coeff(i);
    }
    return sum;
  }
};

struct PsiValue {
  Vector stage;
  Vector step;
};

namespace detail {

/// Block sizes of every set partition of {1..n}, via restricted growth strings.
inline std::vector<std::vector<int>> set_partition_blocks(int n) {
  std::vector<std::vector<int>> out;
  if (n == 0) {
    out.push_back({});
    return out;
  }
  std::vector<int> a(n, 0);
  auto rec = [&](auto& self, int pos, int blocks) -> void {
    if (pos == n) {
      std::vector<int> sizes(blocks, 0);
      for (int x : a) ++sizes[x];
      out.push_back(std::move(sizes));
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      a[pos] = b;
      self(self, pos + 1, std::max(blocks, b + 1));
    }
  };
  rec(rec, 0, 0);
  return out;
}

/// Ordered k-tuples of positive integers summing to n.
inline std::vector<std::vector<int>> compositions(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto& self, int left, int parts) -> void {
    if (parts == 0) {
      if (left == 0) out.push_back(cur);
      return;
    }
    for (int m = 1; m <= left - (parts - 1); ++m) {
      cur.push_back(m);
      self(self, left - m, parts - 1);
      cur.pop_back();
    }
  };
  rec(rec, n, k);
  return out;
}

inline double lambda_weight(int l, int k) {
  double f = 1.0;
  for (int j = 2; j <= k; ++j) f *= j;
  for (int j = 2; j <= l; ++j) f *= j;
  return (k % 2 == 1 ? 1.0 : -1.0) / f;
}

/// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_difference(const Vector& a, const Vector& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

}  // namespace detail

/// Shared state for one (tableau, problem, t, Z): the factorized stage
/// matrix, exact-solution derivatives at t, and memoized tree terms.
class LteEvaluator {
 public:
  LteEvaluator(const ButcherTableau& tab, const SemilinearProblem& p, double t, DenseMatrix Z)
      : tab_(tab.to_float()), p_(p), t_(t), Z_(std::move(Z)) {
    const auto n = static_cast<Eigen::Index>(p_.N);
    if (Z_.rows() != n || Z_.cols() != n) throw std::invalid_argument("Z must be N x N");
    s_ = static_cast<Eigen::Index>(tab_.stages());
    n_ = n;
    lu_.compute(kron_stage_matrix(tab_.A(), Z_));
    if (!(lu_.rcond() > std::numeric_limits<double>::epsilon()))
      throw std::runtime_error("I - A (x) Z is singular or numerically singular");
    order_cap_ = std::min(p_.smoothness, max_lte_order);
    // defects in the tableau's native arithmetic, then rounded once
    tab.visit([&](const auto& t) {
      for (int l = 1; l <= order_cap_ + 1; ++l) {
        const auto d = defect_pair(t, l);
        q_hat_.push_back(to_double(d.q_hat));
        s_hat_.push_back(to_double(d.s_hat));
      }
    });
  }

  int order_cap() const { return order_cap_; }
  const FloatTableau& tableau() const { return tab_; }
  const DenseMatrix& Z() const { return Z_; }
  Eigen::Index stages() const { return s_; }
  Eigen::Index dim() const { return n_; }

  double q_hat(int l) const { return q_hat_.at(static_cast<std::size_t>(l - 1)); }
  const Vec<double>& s_hat(int l) const { return s_hat_.at(static_cast<std::size_t>(l - 1)); }

  const Vector& y(int k) {
    auto it = ycache_.find(k);
    if (it == ycache_.end()) it = ycache_.emplace(k, p_.y(t_, k)).first;
    return it->second;
  }

  /// w (x) v.
  Vector kron(const Vec<double>& w, const Vector& v) const {
    Vector out(s_ * n_);
    for (Eigen::Index i = 0; i < s_; ++i) out.segment(i * n_, n_) = w[static_cast<std::size_t>(i)] * v;
    return out;
  }
  /// (I - A (x) Z)^{-1} x.
  Vector solve(const Vector& x) const { return lu_.solve(x); }
  /// (B (x) I) X for an s x s matrix B.
  Vector apply_stage_matrix(const Matrix<double>& B, const Vector& X) const {
    Vector out = Vector::Zero(s_ * n_);
    for (Eigen::Index i = 0; i < s_; ++i)
      for (Eigen::Index j = 0; j < s_; ++j) {
        const double v = B(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (v != 0.0) out.segment(i * n_, n_) += v * X.segment(j * n_, n_);
      }
    return out;
  }
  /// (c^l (x) I) X, i.e. (C^l (x) I) X.
  Vector scale_by_c(int l, const Vector& X) const {
    Vector out = X;
    for (Eigen::Index i = 0; i < s_; ++i) out.segment(i * n_, n_) *= std::pow(tab_.c()[static_cast<std::size_t>(i)], l);
    return out;
  }
  /// (b^T (x) I) X.
  Vector b_sum(const Vector& X) const {
    Vector out = Vector::Zero(n_);
    for (Eigen::Index i = 0; i < s_; ++i) out += tab_.b()[static_cast<std::size_t>(i)] * X.segment(i * n_, n_);
    return out;
  }

  /// l-th time derivative of t -> g^{(k)}(y(t))[u_1..u_k] at the evaluation
  /// time, by the chain rule over set partitions of the l differentiations.
  Vector g_time_derivative(int k, int l, const std::vector<Vector>& u) {
    if (l + k > max_time_derivative_total)
      throw std::out_of_range("time-differentiated derivative map needs l + k <= " +
                              std::to_string(max_time_derivative_total));
    Vector sum = Vector::Zero(n_);
    const Vector& y0 = y(0);
    for (const auto& blocks : detail::set_partition_blocks(l)) {
      const int order = k + static_cast<int>(blocks.size());
      if (order > p_.smoothness) throw std::out_of_range("problem derivatives of g are not available to order " + std::to_string(order));
      std::vector<Vector> args = u;
      for (int b : blocks) args.push_back(y(b));
      sum += p_.g_derivative(order, y0, args);
    }
    return sum;
  }

  /// Stacked map applied blockwise: block i is g_time_derivative(k, l, U_j block i).
  Vector stacked_G(int k, int l, const std::vector<const Vector*>& U) {
    Vector out(s_ * n_);
    for (Eigen::Index i = 0; i < s_; ++i) {
      std::vector<Vector> u;
      for (const Vector* x : U) u.push_back(x->segment(i * n_, n_));
      out.segment(i * n_, n_) = g_time_derivative(k, l, u);
    }
    return out;
  }

  /// Tree term (psi-tilde, psi).
  const PsiValue& psi(const RootedTree& tree) {
    const std::string key = tree.str();
    if (auto it = psi_cache_.find(key); it != psi_cache_.end()) return it->second;
    if (tree.order() > order_cap_)
      throw std::out_of_range("tree order exceeds available problem smoothness or the series cap");
    PsiValue v;
    const int l = tree.leaves();
    if (tree.is_bushy()) {
      v.stage = solve(kron(s_hat(l + 1), y(l + 1)));
      v.step = q_hat(l + 1) * y(l + 1) + Z_ * b_sum(v.stage);
    } else {
      std::vector<const Vector*> kids;
      for (const auto& c : tree.children()) kids.push_back(&psi(c).stage);
      const int k = static_cast<int>(kids.size());
      const Vector G = stacked_G(k, l, kids);
      const Vector CG = scale_by_c(l, G);
      v.stage = solve(apply_stage_matrix(tab_.A(), CG));
      v.step = b_sum(solve(CG));
    }
    return psi_cache_.emplace(key, std::move(v)).first->second;
  }

 private:
  FloatTableau tab_;
  const SemilinearProblem& p_;
  double t_;
  DenseMatrix Z_;
  Eigen::Index s_ = 0, n_ = 0;
  int order_cap_ = 0;
  Eigen::PartialPivLU<DenseMatrix> lu_;
  std::vector<double> q_hat_;
  std::vector<Vec<double>> s_hat_;
  std::map<int, Vector> ycache_;
  std::map<std::string, PsiValue> psi_cache_;
};

/// Delta_0 = sum_{i<=r} h^i s_i (x) y^{(i)}(t0), delta_0 = sum_{i<=r} h^i q_i y^{(i)}(t0).
inline std::pair<Vector, Vector> defects(const ButcherTableau& tab, const SemilinearProblem& p, double t0, double h,
                                         int r) {
  if (h < 0.0) throw std::invalid_argument("step size must be nonnegative");
  if (r < 0 || r > p.smoothness + 1)
    throw std::out_of_range("defect order " + std::to_string(r) + " exceeds the problem's available derivatives");
  const auto n = static_cast<Eigen::Index>(p.N);
  const auto s = static_cast<Eigen::Index>(tab.stages());
  Vector stage = Vector::Zero(s * n);
  Vector step = Vector::Zero(n);
  tab.visit([&](const auto& t) {
    double hp = 1.0;
    for (int i = 1; i <= r; ++i) {
      hp *= h;
      const auto d = defect_pair(t, i);
      const Vector yi = p.y(t0, i);
      step += hp * to_double(d.q_hat) * yi;
      for (Eigen::Index j = 0; j < s; ++j) stage.segment(j * n, n) += hp * to_double(d.s_hat[static_cast<std::size_t>(j)]) * yi;
    }
  });
  return {stage, step};
}

/// Residual of the stage and step relations when the exact solution is
/// substituted: (y~ - 1 (x) y0 - (A (x) Z) y~ - h (A (x) I)(g + r)(y~), y(t1) - y0 - ...).
inline std::pair<Vector, Vector> exact_solution_residual(const FloatTableau& tab, const SemilinearProblem& p, double t0,
                                                         double h) {
  const auto n = static_cast<Eigen::Index>(p.N);
  const auto s = static_cast<Eigen::Index>(tab.stages());
  const Vector y0 = p.y(t0);
  Vector hf(s * n), Y(s * n);
  for (Eigen::Index i = 0; i < s; ++i) {
    const double ti = t0 + tab.c()[static_cast<std::size_t>(i)] * h;
    Y.segment(i * n, n) = p.y(ti);
    hf.segment(i * n, n) = h * p.f(ti, p.y(ti));
  }
  Vector stage(s * n);
  Vector step = p.y(t0 + h) - y0;
  for (Eigen::Index i = 0; i < s; ++i) {
    Vector acc = Y.segment(i * n, n) - y0;
    for (Eigen::Index j = 0; j < s; ++j)
      acc -= tab.A()(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) * hf.segment(j * n, n);
    stage.segment(i * n, n) = acc;
    step -= tab.b()[static_cast<std::size_t>(i)] * hf.segment(i * n, n);
  }
  return {stage, step};
}

inline void check_series_order(const SemilinearProblem& p, int max_order) {
  if (max_order < 1 || max_order > std::min(p.smoothness, max_lte_order))
    throw std::out_of_range("series order must lie in [1, min(problem smoothness, 5)]");
}

/// Coefficient of h^i is the sum over trees of order i of zeta(tau) psi(tau).
inline LteSeries lte_series_tree(LteEvaluator& ev, int max_order) {
  LteSeries out;
  out.max_order = max_order;
  for (int i = 1; i <= max_order; ++i) {
    Vector step = Vector::Zero(ev.dim());
    Vector stage = Vector::Zero(ev.stages() * ev.dim());
    for (const auto& tree : enumerate_trees(i)) {
      const double z = to_double(zeta(tree));
      const PsiValue& v = ev.psi(tree);
      step += z * v.step;
      stage += z * v.stage;
    }
    out.step.push_back(std::move(step));
    out.stage.push_back(std::move(stage));
  }
  return out;
}

/// sum over trees of order i of |zeta| ||psi||, for step and stage parts: the
/// magnitude of the terms that the order-i coefficient sums. The two parts of
/// a bushy step term are counted separately since they may cancel.
inline std::pair<double, double> tree_term_scale(LteEvaluator& ev, int i) {
  double step = 0.0, stage = 0.0;
  for (const auto& tree : enumerate_trees(i)) {
    const double z = std::abs(to_double(zeta(tree)));
    const PsiValue& v = ev.psi(tree);
    if (tree.is_bushy()) {
      const int l = tree.leaves();
      step += z * (std::abs(ev.q_hat(l + 1)) * ev.y(l + 1).norm() + (ev.Z() * ev.b_sum(v.stage)).norm());
    } else {
      step += z * v.step.norm();
    }
    stage += z * v.stage.norm();
  }
  return {step, stage};
}

inline LteSeries lte_series_tree(const ButcherTableau& tab, const SemilinearProblem& p, double t0,
                                 const DenseMatrix& Z, int max_order) {
  check_series_order(p, max_order);
  LteEvaluator ev(tab, p, t0, Z);
  return lte_series_tree(ev, max_order);
}

/// The direct recursion for the stage, step and nonlinear-term coefficients.
inline LteSeries lte_coeffs_direct(LteEvaluator& ev, int max_order) {
  LteSeries out;
  out.max_order = max_order;
  const auto sn = ev.stages() * ev.dim();
  std::vector<Vector> dY(static_cast<std::size_t>(max_order) + 1, Vector::Zero(sn));
  Vector dg = Vector::Zero(sn);  // Delta g^{(i-1)}, starting from Delta g^{(0)} = 0
  for (int i = 1; i <= max_order; ++i) {
    const Vector lin = ev.solve(ev.kron(ev.s_hat(i), ev.y(i)));
    const Vector non = ev.solve(dg);
    dY[static_cast<std::size_t>(i)] = lin + ev.apply_stage_matrix(ev.tableau().A(), non);
    out.stage.push_back(dY[static_cast<std::size_t>(i)]);
    out.step.push_back(ev.Z() * ev.b_sum(lin) + ev.b_sum(non) + ev.q_hat(i) * ev.y(i));
    if (i == max_order) break;
    dg = Vector::Zero(sn);
    for (int l = 0; l <= i - 1; ++l)
      for (int k = 1; k <= i - l; ++k) {
        const double lam = detail::lambda_weight(l, k);
        for (const auto& m : detail::compositions(i - l, k)) {
          std::vector<const Vector*> args;
          for (int mj : m) args.push_back(&dY[static_cast<std::size_t>(mj)]);
          dg += lam * ev.scale_by_c(l, ev.stacked_G(k, l, args));
        }
      }
  }
  return out;
}

inline LteSeries lte_coeffs_direct(const ButcherTableau& tab, const SemilinearProblem& p, double t0,
                                   const DenseMatrix& Z, int max_order) {
  check_series_order(p, max_order);
  LteEvaluator ev(tab, p, t0, Z);
  return lte_coeffs_direct(ev, max_order);
}

/// Step coefficients of h, h^2, h^3 written out term by term. The
/// nonlinear term uses the problem's Jacobian of g.
inline std::vector<Vector> lte_order3_closed_form(const ButcherTableau& tab, const SemilinearProblem& p, double t0,
                                                  const DenseMatrix& Z) {
  if (p.smoothness < 3) throw std::out_of_range("order-three expansion needs three derivatives");
  LteEvaluator ev(tab, p, t0, Z);
  const auto n = ev.dim();
  const auto s = ev.stages();
  const Vector y0 = p.y(t0);
  const DenseMatrix gp = p.g_jacobian ? p.g_jacobian(y0) : DenseMatrix();
  auto block_jac = [&](const Vector& X) {
    Vector out(s * n);
    for (Eigen::Index i = 0; i < s; ++i)
      out.segment(i * n, n) = gp.size() ? Vector(gp * X.segment(i * n, n))
                                        : p.g_derivative(1, y0, {Vector(X.segment(i * n, n))});
    return out;
  };
  const Vector y1 = p.y(t0, 1), y2 = p.y(t0, 2), y3 = p.y(t0, 3);
  const Vector m2 = ev.solve(ev.kron(ev.s_hat(2), y2));
  const Vector m3 = ev.solve(ev.kron(ev.s_hat(3), y3));
  std::vector<Vector> c;
  c.push_back(ev.q_hat(1) * y1);
  c.push_back(ev.q_hat(2) * y2 + Z * ev.b_sum(m2));
  c.push_back(ev.q_hat(3) * y3 + Z * ev.b_sum(m3) + ev.b_sum(ev.solve(block_jac(m2))));
  return c;
}

/// Randomized check of the abstract recursion
///   v_1 = 0,  v_{i+1} = a_i + sum_{l<i} sum_{k<=i-l} lambda_{l,k} sum_{m_1+..+m_k=i-l} W_{l,k}(v_{m_1},..,v_{m_k})
/// against its tree-sum solution, up to v_max_order. W_{l,k} is nonzero for
/// k <= 3 and l <= 2 only.
struct AbstractRecursionResult {
  bool passed = false;
  double max_relative_difference = 0.0;
  std::vector<Vector> direct;
  std::vector<Vector> tree_sum;
};

inline AbstractRecursionResult abstract_recursion_run(int d, std::uint64_t seed, int max_order = 5,
                                                      double tol = 1e-10, bool zero_maps = false) {
  if (d < 1 || d > 4) throw std::invalid_argument("abstract recursion dimension must be in [1, 4]");
  if (max_order < 1 || max_order > max_enumeration_order) throw std::out_of_range("order out of range");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto rand_vec = [&] {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = normal(rng);
    return v;
  };
  std::vector<Vector> a(static_cast<std::size_t>(max_order));  // a_0 .. a_{max_order-1}, a_0 = 0
  a[0] = Vector::Zero(d);
  for (int i = 1; i < max_order; ++i) a[static_cast<std::size_t>(i)] = rand_vec();

  // symmetric k-linear maps as sums of rank-one terms c_r prod_j <w_r, u_j>
  struct Sym {
    std::vector<Vector> c, w;
  };
  std::map<std::pair<int, int>, Sym> maps;
  std::map<std::pair<int, int>, double> lam;
  for (int l = 0; l <= 2; ++l)
    for (int k = 1; k <= 3; ++k) {
      Sym m;
      for (int r = 0; r <= d; ++r) {
        m.c.push_back(rand_vec());
        m.w.push_back(rand_vec());
      }
      maps[{l, k}] = std::move(m);
      lam[{l, k}] = normal(rng);
    }
  auto W = [&](int l, int k, const std::vector<const Vector*>& u) -> Vector {
    auto it = maps.find({l, k});
    if (zero_maps || it == maps.end()) return Vector::Zero(d);
    Vector out = Vector::Zero(d);
    for (std::size_t r = 0; r < it->second.c.size(); ++r) {
      double f = 1.0;
      for (const Vector* x : u) f *= it->second.w[r].dot(*x);
      out += f * it->second.c[r];
    }
    return out;
  };
  auto lambda = [&](int l, int k) {
    auto it = lam.find({l, k});
    return it == lam.end() ? 0.0 : it->second;
  };

  AbstractRecursionResult res;
  // direct
  std::vector<Vector> v(static_cast<std::size_t>(max_order) + 1, Vector::Zero(d));
  for (int i = 1; i < max_order; ++i) {
    Vector next = a[static_cast<std::size_t>(i)];
    for (int l = 0; l <= i - 1; ++l)
      for (int k = 1; k <= i - l; ++k)
        for (const auto& m : detail::compositions(i - l, k)) {
          std::vector<const Vector*> args;
          for (int mj : m) args.push_back(&v[static_cast<std::size_t>(mj)]);
          next += lambda(l, k) * W(l, k, args);
        }
    v[static_cast<std::size_t>(i) + 1] = next;
  }
  // tree sum
  std::map<std::string, Vector> phi;
  auto eval_phi = [&](auto& self, const RootedTree& t) -> const Vector& {
    const std::string key = t.str();
    if (auto it = phi.find(key); it != phi.end()) return it->second;
    Vector val;
    if (t.is_bushy()) {
      val = a[static_cast<std::size_t>(t.leaves())];
    } else {
      std::vector<const Vector*> args;
      for (const auto& c : t.children()) args.push_back(&self(self, c));
      val = W(t.leaves(), static_cast<int>(args.size()), args);
    }
    return phi.emplace(key, std::move(val)).first->second;
  };
  for (int i = 1; i <= max_order; ++i) {
    Vector sum = Vector::Zero(d);
    for (const auto& t : enumerate_trees(i)) sum += zeta_weighted(t, lambda) * eval_phi(eval_phi, t);
    res.tree_sum.push_back(sum);
    res.direct.push_back(v[static_cast<std::size_t>(i)]);
    res.max_relative_difference =
        std::max(res.max_relative_difference, detail::relative_difference(sum, v[static_cast<std::size_t>(i)]));
  }
  res.passed = res.max_relative_difference <= tol;
  return res;
}

inline bool abstract_recursion_check(int d, std::uint64_t seed, int max_order = 5, double tol = 1e-10) {
  return abstract_recursion_run(d, seed, max_order, tol).passed;
}

struct RemainderProbe {
  OrderFit fit;
  std::vector<double> hs;
  std::vector<double> remainders;
};

/// Norm of y(t0+h) - y_1 - sum_{i<=m} h^i (coefficient at Z = hJ), fitted
/// against h. With m = 0 this is the plain one-step error.
inline RemainderProbe one_step_remainder_probe(const ButcherTableau& tab, const SemilinearProblem& p, double t0,
                                               const std::vector<double>& hs, int m, const NewtonConfig& cfg = {}) {
  if (m < 0 || m > std::min(p.smoothness, max_lte_order)) throw std::out_of_range("remainder order out of range");
  RemainderProbe out;
  out.hs = hs;
  const FloatTableau ft = tab.to_float();
  for (double h : hs) {
    Vector e = one_step_error(ft, p, t0, h, cfg);
    if (m > 0) e -= lte_series_tree(tab, p, t0, h * p.J, m).truncated(h, m);
    out.remainders.push_back(e.norm());
  }
  out.fit = estimate_order(out.remainders, hs, 100.0 * std::numeric_limits<double>::epsilon() * p.y(t0).norm());
  return out;
}

}  // namespace slrk
