#pragma once

// Semilinear order conditions. Every rooted tree tau gets a subspace V_tau of
// R^s (A-invariant, built recursively from the defect vectors s_hat), and
// the conditions are orthogonality relations between b and those spaces.

#include "slrk/dense.hpp"
#include "slrk/tableau.hpp"
#include "slrk/trees.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace slrk {

struct SpaceOptions {
  /// Float mode: singular values at or below this count as zero. A negative
  /// value selects s * eps * (largest generator norm).
  double rank_tol = -1.0;
  /// Float mode: absolute floor under the rank tolerance. Generators this
  /// small are indistinguishable from round-off in the defect vectors.
  double zero_tol = default_tol;
};

/// Basis of V_tau. Rational mode keeps the pivot generators found by exact
/// elimination; float mode keeps orthonormal columns.
template <class T>
struct TreeSpaceBasis {
  RootedTree tree;
  std::vector<Vec<T>> basis;
  std::size_t generators_tried = 0;

  std::size_t dimension() const { return basis.size(); }
  static constexpr Mode mode() { return mode_of<T>(); }
};

namespace detail {

inline Eigen::VectorXd to_eigen(const Vec<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Vec<double> from_eigen(const Eigen::VectorXd& v) { return Vec<double>(v.data(), v.data() + v.size()); }

/// Incrementally grown span of vectors in R^s.
template <class T>
class Span {
 public:
  Span(std::size_t dim, const SpaceOptions& opts) : dim_(dim), opts_(opts) {}

  /// Adds generators; returns the new rank.
  std::size_t add(const std::vector<Vec<T>>& gens) {
    generators_.insert(generators_.end(), gens.begin(), gens.end());
    rebuild();
    return basis_.size();
  }

  std::size_t rank() const { return basis_.size(); }
  const std::vector<Vec<T>>& basis() const { return basis_; }

 private:
  void rebuild() {
    basis_.clear();
    if (generators_.empty()) return;
    if constexpr (is_rational_v<T>) {
      auto m = Matrix<Rational>::from_columns(generators_, dim_);
      for (auto j : pivot_columns(m)) basis_.push_back(generators_[j]);
    } else {
      Eigen::MatrixXd g(dim_, generators_.size());
      double max_norm = 0.0;
      for (std::size_t j = 0; j < generators_.size(); ++j) {
        g.col(static_cast<Eigen::Index>(j)) = to_eigen(generators_[j]);
        max_norm = std::max(max_norm, g.col(static_cast<Eigen::Index>(j)).norm());
      }
      double tol = opts_.rank_tol >= 0.0
                       ? opts_.rank_tol
                       : static_cast<double>(dim_) * std::numeric_limits<double>::epsilon() * max_norm;
      tol = std::max(tol, opts_.zero_tol);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
      const Eigen::MatrixXd r = qr.matrixR().template triangularView<Eigen::Upper>();
      const Eigen::Index k = std::min<Eigen::Index>(r.rows(), r.cols());
      Eigen::Index rnk = 0;
      while (rnk < k && std::abs(r(rnk, rnk)) > tol) ++rnk;
      if (rnk == 0) return;
      const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim_, rnk);
      for (Eigen::Index j = 0; j < rnk; ++j) basis_.push_back(from_eigen(q.col(j)));
    }
  }

  std::size_t dim_;
  SpaceOptions opts_;
  std::vector<Vec<T>> generators_;
  std::vector<Vec<T>> basis_;
};

/// All Hadamard products beta_1 x ... x beta_k with beta_i from the given bases.
template <class T>
std::vector<Vec<T>> basis_products(const std::vector<const std::vector<Vec<T>>*>& factors, std::size_t dim) {
  std::vector<Vec<T>> out{Vec<T>(dim, from_int<T>(1))};
  for (const auto* f : factors) {
    std::vector<Vec<T>> next;
    next.reserve(out.size() * f->size());
    for (const auto& p : out)
      for (const auto& beta : *f) next.push_back(hadamard(p, beta));
    out = std::move(next);
  }
  return out;
}

}  // namespace detail

/// Memoized V_tau computation for one tableau.
template <class T>
class TreeSpaces {
 public:
  explicit TreeSpaces(const BasicTableau<T>& tab, SpaceOptions opts = {}) : tab_(tab), opts_(opts) {}

  const BasicTableau<T>& tableau() const { return tab_; }
  const SpaceOptions& options() const { return opts_; }

  const TreeSpaceBasis<T>& space(const RootedTree& t) {
    if (t.is_leaf()) throw std::invalid_argument("V_tau is not defined for the single-vertex tree");
    if (auto it = memo_.find(t.str()); it != memo_.end()) return it->second;
    TreeSpaceBasis<T> out = build(t);
    return memo_.emplace(t.str(), std::move(out)).first->second;
  }

  /// C^l (beta_1 x ... x beta_k) over all basis combinations of the children.
  std::vector<Vec<T>> seed_vectors(const RootedTree& t) {
    std::vector<const std::vector<Vec<T>>*> factors;
    for (const auto& child : t.children()) factors.push_back(&space(child).basis);
    auto prods = detail::basis_products<T>(factors, tab_.stages());
    const Vec<T> cl = elementwise_power(tab_.c(), t.leaves());
    for (auto& p : prods) p = hadamard(cl, p);
    return prods;
  }

 private:
  TreeSpaceBasis<T> build(const RootedTree& t) {
    const std::size_t s = tab_.stages();
    TreeSpaceBasis<T> out{t, {}, 0};
    detail::Span<T> span(s, opts_);
    std::vector<Vec<T>> pass;
    if (t.is_bushy()) {
      pass.push_back(defect_pair(tab_, t.leaves() + 1).s_hat);
    } else {
      pass = seed_vectors(t);
      for (auto& v : pass) v = tab_.A() * v;
    }
    // Krylov growth; a pass that adds no rank means the span is A-invariant.
    std::size_t last_rank = 0;
    for (std::size_t j = 0; j < s && !pass.empty(); ++j) {
      if (j > 0)
        for (auto& v : pass) v = tab_.A() * v;
      out.generators_tried += pass.size();
      const std::size_t r = span.add(pass);
      if (r == last_rank || r == s) {
        last_rank = r;
        break;
      }
      last_rank = r;
    }
    out.basis = span.basis();
    return out;
  }

  BasicTableau<T> tab_;
  SpaceOptions opts_;
  std::map<std::string, TreeSpaceBasis<T>> memo_;
};

template <class T>
TreeSpaceBasis<T> v_space(const BasicTableau<T>& tab, const RootedTree& t, SpaceOptions opts = {}) {
  TreeSpaces<T> spaces(tab, opts);
  return spaces.space(t);
}

/// Residuals of the order conditions attached to one tree.
template <class T>
std::vector<T> condition_residuals(TreeSpaces<T>& spaces, const RootedTree& t) {
  const auto& tab = spaces.tableau();
  std::vector<T> res;
  if (t.is_bushy()) {
    res.push_back(defect_pair(tab, t.leaves() + 1).q_hat);
    if (!t.is_leaf())
      for (const auto& beta : spaces.space(t).basis) res.push_back(dot(tab.b(), beta));
    return res;
  }
  for (auto v : spaces.seed_vectors(t)) {
    for (std::size_t j = 0; j < tab.stages(); ++j) {
      if (j > 0) v = tab.A() * v;
      res.push_back(dot(tab.b(), v));
    }
  }
  return res;
}

template <class T>
std::vector<T> condition_residuals(const BasicTableau<T>& tab, const RootedTree& t, SpaceOptions opts = {}) {
  TreeSpaces<T> spaces(tab, opts);
  return condition_residuals(spaces, t);
}

struct TreeRecord {
  RootedTree tree;
  bool satisfied = false;
  double max_residual = 0.0;
  bool skipped = false;
};

struct OrderReport {
  int p_sl = 0;
  /// p_sl reached max_order, so the true semilinear order may be higher.
  bool saturated = false;
  int max_order = 0;
  double tol = default_tol;
  bool reduction = true;
  Mode mode = Mode::rational;
  std::vector<TreeRecord> trees;
};

inline constexpr int max_condition_order = 6;

/// Semilinear order p_SL: the largest m such that every (non-skipped) tree
/// with at most m vertices satisfies its conditions. With reduction on,
/// trees that are not semi-lone-child-avoiding are skipped.
template <class T>
OrderReport semilinear_order(const BasicTableau<T>& tab, int max_order = 5, double tol = default_tol,
                             bool use_reduction = true, SpaceOptions opts = {}) {
  if (max_order < 1 || max_order > max_condition_order)
    throw std::out_of_range("max_order must be in [1, " + std::to_string(max_condition_order) + "]");
  opts.zero_tol = std::min(opts.zero_tol, tol);
  TreeSpaces<T> spaces(tab, opts);
  OrderReport rep;
  rep.max_order = max_order;
  rep.tol = tol;
  rep.reduction = use_reduction;
  rep.mode = mode_of<T>();
  rep.p_sl = max_order;
  bool failed = false;
  for (int n = 1; n <= max_order; ++n) {
    for (const auto& t : enumerate_trees(n)) {
      TreeRecord r{t, false, 0.0, false};
      if (use_reduction && !is_semi_lone_child_avoiding(t)) {
        r.skipped = true;
        rep.trees.push_back(r);
        continue;
      }
      r.satisfied = true;
      for (const auto& x : condition_residuals(spaces, t)) {
        r.max_residual = std::max(r.max_residual, magnitude(x));
        r.satisfied = r.satisfied && is_zero(x, tol);
      }
      if (!r.satisfied && !failed) {
        failed = true;
        rep.p_sl = n - 1;
      }
      rep.trees.push_back(r);
    }
  }
  rep.saturated = !failed;
  return rep;
}

/// Largest m with b^T c^l = 1/(l+1) and b^T A^i (c^{l+1}/(l+1) - A c^l) = 0
/// for l < m and i = 0..s-1. Capped at 10.
template <class T>
OrderProbe weak_stage_order(const BasicTableau<T>& tab, double tol = default_tol) {
  const std::size_t s = tab.stages();
  for (int l = 0; l < stage_order_cap; ++l) {
    const Vec<T> cl = elementwise_power(tab.c(), l);
    const Vec<T> cl1 = elementwise_power(tab.c(), l + 1);
    bool ok = is_zero(dot(tab.b(), cl) - ratio<T>(1, l + 1), tol);
    Vec<T> v = ratio<T>(1, l + 1) * cl1 - tab.A() * cl;
    for (std::size_t i = 0; i < s && ok; ++i) {
      if (i > 0) v = tab.A() * v;
      ok = is_zero(dot(tab.b(), v), tol);
    }
    if (!ok) return {l, false};
  }
  return {stage_order_cap, true};
}

/// Labels of the printed order-condition table through order five. Row 5h
/// is left out: its printed formula duplicates 5g.
inline const std::vector<std::string>& table1_labels() {
  static const std::vector<std::string> labels = {"1a", "2a", "3a", "3b", "4a", "4b", "4c", "4d",
                                                  "5a", "5b", "5c", "5d", "5e", "5f", "5g", "5i"};
  return labels;
}

inline RootedTree table1_tree(const std::string& label) {
  static const std::map<std::string, std::string> trees = {
      {"1a", "[]"},         {"2a", "[[]]"},       {"3a", "[[][]]"},     {"3b", "[[[]]]"},
      {"4a", "[[][][]]"},   {"4b", "[[[]][]]"},   {"4c", "[[[][]]]"},   {"4d", "[[[[]]]]"},
      {"5a", "[[][][][]]"}, {"5b", "[[[]][][]]"}, {"5c", "[[[]][[]]]"}, {"5d", "[[[][]][]]"},
      {"5e", "[[[[]]][]]"}, {"5f", "[[[][][]]]"}, {"5g", "[[[[]][]]]"}, {"5h", "[[[[][]]]]"},
      {"5i", "[[[[[]]]]]"}};
  auto it = trees.find(label);
  if (it == trees.end()) throw std::invalid_argument("unknown table label \"" + label + "\"");
  return RootedTree::parse(it->second);
}

/// Evaluates the printed table row formula over every index tuple
/// i1..i4 in {0..s-1} that the row uses.
template <class T>
std::vector<T> table1_residuals(const BasicTableau<T>& tab, const std::string& label) {
  const std::size_t s = tab.stages();
  const auto& A = tab.A();
  const auto& b = tab.b();
  const auto& c = tab.c();
  auto cp = [&](int k) { return elementwise_power(c, k); };
  auto apow = [&](std::size_t k, Vec<T> v) {
    for (std::size_t i = 0; i < k; ++i) v = A * v;
    return v;
  };
  auto cmul = [&](int k, const Vec<T>& v) { return hadamard(cp(k), v); };
  // c^{k}/k! - A c^{k-1}/(k-1)!
  auto w = [&](int k) {
    Vec<T> v = (from_int<T>(1) / factorial<T>(k)) * cp(k) - (from_int<T>(1) / factorial<T>(k - 1)) * (A * cp(k - 1));
    return v;
  };
  auto quad = [&](int k) { return from_int<T>(1) / factorial<T>(k) - dot(b, cp(k - 1)) / factorial<T>(k - 1); };

  std::vector<T> res;
  auto over = [&](int n, const std::function<T(const std::vector<std::size_t>&)>& f) {
    std::vector<std::size_t> idx(n, 0);
    for (;;) {
      res.push_back(f(idx));
      int pos = 0;
      while (pos < n && ++idx[pos] == s) idx[pos++] = 0;
      if (pos == n) break;
    }
  };
  using I = std::vector<std::size_t>;

  if (label == "1a") {
    res.push_back(from_int<T>(1) - dot(b, Vec<T>(s, from_int<T>(1))));
  } else if (label == "2a" || label == "3a" || label == "4a" || label == "5a") {
    const int k = label[0] - '0';
    res.push_back(quad(k));
    const Vec<T> v = w(k);
    over(1, [&](const I& i) { return dot(b, apow(i[0], v)); });
  } else if (label == "3b") {
    over(2, [&](const I& i) { return dot(b, apow(i[0] + i[1], w(2))); });
  } else if (label == "4b") {
    over(2, [&](const I& i) { return dot(b, apow(i[0], cmul(1, apow(i[1], w(2))))); });
  } else if (label == "4c") {
    over(2, [&](const I& i) { return dot(b, apow(i[0] + i[1], w(3))); });
  } else if (label == "4d") {
    over(3, [&](const I& i) { return dot(b, apow(i[0] + i[1] + i[2] + 1, w(2))); });
  } else if (label == "5b") {
    over(2, [&](const I& i) { return dot(b, apow(i[0], cmul(2, apow(i[1], w(2))))); });
  } else if (label == "5c") {
    over(3, [&](const I& i) { return dot(b, apow(i[0], hadamard(apow(i[1], w(2)), apow(i[2], w(2))))); });
  } else if (label == "5d") {
    over(2, [&](const I& i) { return dot(b, apow(i[0], cmul(1, apow(i[1], w(3))))); });
  } else if (label == "5e") {
    over(3, [&](const I& i) { return dot(b, apow(i[0], cmul(1, apow(i[1] + i[2] + 1, w(2))))); });
  } else if (label == "5f") {
    over(2, [&](const I& i) { return dot(b, apow(i[0] + i[1], w(4))); });
  } else if (label == "5g") {
    over(3, [&](const I& i) { return dot(b, apow(i[0] + i[1] + 1, cmul(1, apow(i[2], w(2))))); });
  } else if (label == "5i") {
    over(4, [&](const I& i) { return dot(b, apow(i[0] + i[1] + i[2] + i[3] + 2, w(2))); });
  } else {
    throw std::invalid_argument("unknown or unsupported table label \"" + label + "\"");
  }
  return res;
}

/// Distance of `vectors` from span(`super_basis`). Exact (0 or the float
/// distance of an offending vector) in rational mode.
template <class T>
double subspace_residual(const std::vector<Vec<T>>& vectors, const std::vector<Vec<T>>& super_basis,
                         std::size_t dim) {
  if (vectors.empty()) return 0.0;
  if constexpr (is_rational_v<T>) {
    const std::size_t base = super_basis.empty() ? 0 : rank(Matrix<Rational>::from_columns(super_basis, dim));
    double worst = 0.0;
    for (const auto& v : vectors) {
      auto cols = super_basis;
      cols.push_back(v);
      if (rank(Matrix<Rational>::from_columns(cols, dim)) == base) continue;
      std::vector<Vec<double>> fb;
      for (const auto& x : super_basis) fb.push_back(to_double(x));
      worst = std::max(worst, std::max(subspace_residual(std::vector<Vec<double>>{to_double(v)}, fb, dim),
                                       std::numeric_limits<double>::min()));
    }
    return worst;
  } else {
    Eigen::MatrixXd q(dim, super_basis.size());
    for (std::size_t j = 0; j < super_basis.size(); ++j)
      q.col(static_cast<Eigen::Index>(j)) = detail::to_eigen(super_basis[j]);
    if (super_basis.size() > 0) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
      q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, static_cast<Eigen::Index>(super_basis.size()));
    }
    double worst = 0.0;
    for (const auto& v : vectors) {
      Eigen::VectorXd x = detail::to_eigen(v);
      if (super_basis.size() > 0) x -= q * (q.transpose() * x);
      worst = std::max(worst, x.norm());
    }
    return worst;
  }
}

/// max over basis vectors beta of dist(A beta, V_tau).
template <class T>
double invariance_residual(const BasicTableau<T>& tab, const TreeSpaceBasis<T>& sp) {
  std::vector<Vec<T>> images;
  for (const auto& beta : sp.basis) images.push_back(tab.A() * beta);
  return subspace_residual(images, sp.basis, tab.stages());
}

}  // namespace slrk
