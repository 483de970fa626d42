#pragma once

// Rooted trees in standardized form [tau0^l tau1 ... tauk]: the leaf children
// of every vertex are absorbed into a count, the remaining children are kept
// as a canonically ordered multiset.

#include "slrk/scalar.hpp"

#include <algorithm>
#include <compare>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slrk {

/// Root-to-vertex address: successive indices into `RootedTree::children()`.
using VertexPath = std::vector<std::size_t>;

class RootedTree {
 public:
  /// The single-vertex tree tau0.
  RootedTree() { refresh(); }

  RootedTree(int leaves, std::vector<RootedTree> children) : leaves_(leaves), children_(std::move(children)) {
    if (leaves_ < 0) throw std::invalid_argument("negative leaf count");
    std::vector<RootedTree> kept;
    kept.reserve(children_.size());
    for (auto& c : children_) {
      if (c.is_leaf())
        ++leaves_;
      else
        kept.push_back(std::move(c));
    }
    children_ = std::move(kept);
    std::sort(children_.begin(), children_.end(), [](const RootedTree& a, const RootedTree& b) { return b < a; });
    refresh();
  }

  /// [tau0^l]; bushy(0) is tau0.
  static RootedTree bushy(int leaves) { return RootedTree(leaves, {}); }

  /// Parses nested-bracket notation, e.g. "[[[]][]]". Child order is free.
  static RootedTree parse(std::string_view text) {
    std::size_t pos = 0;
    auto skip = [&] {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto fail = [&](const std::string& why) {
      throw std::invalid_argument("tree \"" + std::string(text) + "\" at offset " + std::to_string(pos) + ": " + why);
    };
    auto node = [&](auto&& self) -> RootedTree {
      skip();
      if (pos >= text.size() || text[pos] != '[') fail("expected '['");
      ++pos;
      std::vector<RootedTree> kids;
      for (;;) {
        skip();
        if (pos >= text.size()) fail("unterminated bracket");
        if (text[pos] == ']') {
          ++pos;
          break;
        }
        kids.push_back(self(self));
      }
      return RootedTree(0, std::move(kids));
    };
    RootedTree t = node(node);
    skip();
    if (pos != text.size()) fail("trailing characters");
    return t;
  }

  int leaves() const { return leaves_; }
  const std::vector<RootedTree>& children() const { return children_; }
  int order() const { return order_; }
  bool is_leaf() const { return order_ == 1; }
  bool is_bushy() const { return children_.empty(); }
  const std::string& str() const { return encoding_; }

  /// Canonical total order: by vertex count, then by bracket encoding.
  friend std::strong_ordering operator<=>(const RootedTree& a, const RootedTree& b) {
    if (auto c = a.order_ <=> b.order_; c != 0) return c;
    return a.encoding_ <=> b.encoding_;
  }
  friend bool operator==(const RootedTree& a, const RootedTree& b) { return a.encoding_ == b.encoding_; }

  /// Vertex reached by following `path` from the root.
  const RootedTree& at(const VertexPath& path) const {
    const RootedTree* t = this;
    for (auto i : path) {
      if (i >= t->children_.size()) throw std::out_of_range("vertex path leaves the tree");
      t = &t->children_[i];
    }
    return *t;
  }

 private:
  void refresh() {
    order_ = 1 + leaves_;
    encoding_ = "[";
    for (const auto& c : children_) {
      order_ += c.order_;
      encoding_ += c.encoding_;
    }
    for (int i = 0; i < leaves_; ++i) encoding_ += "[]";
    encoding_ += "]";
  }

  int leaves_ = 0;
  std::vector<RootedTree> children_;
  int order_ = 1;
  std::string encoding_;
};

inline constexpr int max_enumeration_order = 10;

namespace detail {

inline void extend_multisets(const std::vector<RootedTree>& pool, std::size_t max_index, int remaining,
                             std::vector<RootedTree>& picked, std::vector<RootedTree>& out) {
  if (remaining == 0) {
    out.emplace_back(0, picked);
    return;
  }
  for (std::size_t i = max_index + 1; i-- > 0;) {
    if (pool[i].order() > remaining) continue;
    picked.push_back(pool[i]);
    extend_multisets(pool, i, remaining - pool[i].order(), picked, out);
    picked.pop_back();
  }
}


using TreeCache = std::map<int, std::vector<RootedTree>>;

inline const std::vector<RootedTree>& trees_of_order(TreeCache& cache, int order) {
  if (auto it = cache.find(order); it != cache.end()) return it->second;
  std::vector<RootedTree> pool;
  for (int n = 1; n < order; ++n) {
    const auto& lower = trees_of_order(cache, n);
    pool.insert(pool.end(), lower.begin(), lower.end());
  }
  std::vector<RootedTree> trees, picked;
  if (order == 1)
    trees.emplace_back();
  else
    extend_multisets(pool, pool.size() - 1, order - 1, picked, trees);
  std::sort(trees.begin(), trees.end());
  return cache.emplace(order, std::move(trees)).first->second;
}

}  // namespace detail

/// All rooted trees with exactly `order` vertices, canonical and ascending.
inline std::vector<RootedTree> enumerate_trees(int order) {
  if (order < 1 || order > max_enumeration_order)
    throw std::out_of_range("tree order must be in [1, " + std::to_string(max_enumeration_order) + "]");
  static std::mutex mu;
  static detail::TreeCache cache;
  std::lock_guard lock(mu);
  return detail::trees_of_order(cache, order);
}

/// Trees of orders 1..max_order, grouped by order.
inline std::vector<RootedTree> enumerate_trees_up_to(int max_order) {
  std::vector<RootedTree> all;
  for (int n = 1; n <= max_order; ++n) {
    auto t = enumerate_trees(n);
    all.insert(all.end(), t.begin(), t.end());
  }
  return all;
}

/// True iff no vertex has exactly one child that is itself not a leaf.
inline bool is_semi_lone_child_avoiding(const RootedTree& t) {
  if (t.leaves() == 0 && t.children().size() == 1) return false;
  return std::all_of(t.children().begin(), t.children().end(), is_semi_lone_child_avoiding);
}

/// Vertices with exactly one child where that child is not a leaf.
inline std::vector<VertexPath> suppressible_vertices(const RootedTree& t) {
  std::vector<VertexPath> out;
  VertexPath path;
  auto walk = [&](auto&& self, const RootedTree& node) -> void {
    if (node.leaves() == 0 && node.children().size() == 1) out.push_back(path);
    for (std::size_t i = 0; i < node.children().size(); ++i) {
      path.push_back(i);
      self(self, node.children()[i]);
      path.pop_back();
    }
  };
  walk(walk, t);
  return out;
}

/// Removes the vertex at `path` and hangs its only child from its parent.
inline RootedTree suppress_vertex(const RootedTree& t, const VertexPath& path) {
  const RootedTree& v = t.at(path);
  if (!(v.leaves() == 0 && v.children().size() == 1))
    throw std::invalid_argument("vertex must have exactly one child and that child must not be a leaf");
  auto rebuild = [&](auto&& self, const RootedTree& node, std::size_t depth) -> RootedTree {
    if (depth == path.size()) return node.children().front();
    std::vector<RootedTree> kids = node.children();
    kids[path[depth]] = self(self, node.children()[path[depth]], depth + 1);
    return RootedTree(node.leaves(), std::move(kids));
  };
  return rebuild(rebuild, t, 0);
}

/// Combinatorial factor of the tree expansion of the local error, with
/// weights lambda_{l,k} = (-1)^{k+1} / (k! l!).
inline Rational zeta(const RootedTree& t) {
  if (t.is_bushy()) return 1;
  const auto& kids = t.children();
  const int k = static_cast<int>(kids.size());
  Rational z = (k % 2 == 1 ? Rational(1) : Rational(-1)) / factorial_rational(t.leaves());
  // k!/(mu_1! ... mu_sigma!) cancels the 1/k! in lambda, leaving 1/prod(mu_j!).
  std::size_t i = 0;
  while (i < kids.size()) {
    std::size_t j = i;
    while (j < kids.size() && kids[j] == kids[i]) ++j;
    z /= factorial_rational(static_cast<int>(j - i));
    i = j;
  }
  for (const auto& c : kids) z *= zeta(c);
  return z;
}

/// zeta for arbitrary weights lambda(l, k); the bushy value is 1 as before.
template <class Weight>
double zeta_weighted(const RootedTree& t, Weight&& lambda) {
  if (t.is_bushy()) return 1.0;
  const auto& kids = t.children();
  const int k = static_cast<int>(kids.size());
  double z = lambda(t.leaves(), k);
  for (int j = 2; j <= k; ++j) z *= j;
  std::size_t i = 0;
  while (i < kids.size()) {
    std::size_t j = i;
    while (j < kids.size() && kids[j] == kids[i]) ++j;
    for (std::size_t m = 2; m <= j - i; ++m) z /= static_cast<double>(m);
    i = j;
  }
  for (const auto& c : kids) z *= zeta_weighted(c, lambda);
  return z;
}

/// Butcher's density gamma(tau) = |tau| * prod gamma(child), counting leaves.
inline Rational density(const RootedTree& t) {
  Rational g = t.order();
  for (const auto& c : t.children()) g *= density(c);
  return g;
}

}  // namespace slrk
