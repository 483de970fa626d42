// Acceptance run: one PASS/FAIL line per criterion, followed by the numbers
// behind the verdict. Exits 1 when any criterion fails.

#include "slrk/catalog.hpp"
#include "slrk/conditions.hpp"
#include "slrk/harness.hpp"
#include "slrk/lte.hpp"
#include "slrk/solver.hpp"
#include "slrk/stability.hpp"
#include "slrk/trees.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void run(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < budget_s;
  const bool ok = o.passed && in_time;
  if (!ok) ++failures;
  std::printf("%s %2d %s (%.2f s, budget %.0f s%s)\n", ok ? "PASS" : "FAIL", id, title, secs, budget_s,
              in_time ? "" : ", over budget");
  if (!o.detail.empty()) std::printf("%s", o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome tree_census() {
  const std::vector<std::size_t> expected = {1, 1, 2, 4, 9};
  Outcome o{true, {}};
  std::size_t total = 0, slca = 0;
  std::ostringstream d;
  d << "     counts:";
  for (int n = 1; n <= 5; ++n) {
    const auto ts = slrk::enumerate_trees(n);
    d << ' ' << ts.size();
    o.passed = o.passed && ts.size() == expected[n - 1];
    total += ts.size();
    for (const auto& t : ts) slca += slrk::is_semi_lone_child_avoiding(t);
  }
  d << "  total " << total << "  slca " << slca << '\n';
  o.passed = o.passed && total == 17 && slca == 9;
  o.detail = d.str();
  return o;
}

Outcome order_checker() {
  Outcome o{true, {}};
  std::ostringstream d;
  const auto exact = [&](const char* name, int want, bool at_least) {
    const auto t = slrk::catalog_lookup(name);
    if (!t.rational()) {
      o.passed = false;
      d << "     " << name << ": not available in rational mode\n";
      return;
    }
    const int p = slrk::semilinear_order(*t.rational()).p_sl;
    const bool ok = at_least ? p >= want : p == want;
    o.passed = o.passed && ok;
    d << "     " << name << " (rational): p_SL = " << p << (at_least ? ", want >= " : ", want ") << want << '\n';
  };
  exact("backward-euler", 1, false);
  exact("implicit-midpoint", 1, false);
  exact("trapezoid", 2, false);
  exact("radau-iia-2", 2, true);
  const int g2 = slrk::semilinear_order(slrk::catalog_lookup("gauss-2").to_float(), 5, 1e-10).p_sl;
  o.passed = o.passed && g2 >= 2;
  d << "     gauss-2 (float, tol 1e-10): p_SL = " << g2 << ", want >= 2\n";
  o.detail = d.str();
  return o;
}

template <class T>
bool reduction_agrees(const slrk::BasicTableau<T>& tab) {
  const auto red = slrk::semilinear_order(tab, 5, 1e-10, true);
  const auto full = slrk::semilinear_order(tab, 5, 1e-10, false);
  if (red.p_sl != full.p_sl || red.trees.size() != full.trees.size()) return false;
  for (std::size_t i = 0; i < red.trees.size(); ++i)
    if (!red.trees[i].skipped && red.trees[i].satisfied != full.trees[i].satisfied) return false;
  return true;
}

// Random s-stage tableaux with c = A1, in three families: lower triangular,
// full with weights fitted to the quadrature conditions, and collocation
// methods on random nodes (stage order s, so the higher trees are reached).
slrk::FloatTableau random_tableau(std::mt19937& rng, int index) {
  std::uniform_int_distribution<int> stages(1, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int s = stages(rng);
  const int family = index % 3;
  slrk::Matrix<double> a(s, s);
  std::vector<double> b(s);
  if (family == 2) {
    std::vector<double> c(s);
    for (auto& x : c) x = 0.5 * (u(rng) + 1.0);
    Eigen::MatrixXd p(s, s), w(s, s);
    for (int i = 0; i < s; ++i)
      for (int k = 0; k < s; ++k) {
        p(i, k) = std::pow(c[i], k);
        w(i, k) = std::pow(c[i], k + 1) / (k + 1);
      }
    const Eigen::MatrixXd am = p.transpose().partialPivLu().solve(w.transpose()).transpose();
    Eigen::VectorXd e(s);
    for (int k = 0; k < s; ++k) e(k) = 1.0 / (k + 1);
    const Eigen::VectorXd bw = p.transpose().partialPivLu().solve(e);
    for (int i = 0; i < s; ++i) {
      b[i] = bw(i);
      for (int j = 0; j < s; ++j) a(i, j) = am(i, j);
    }
    return slrk::FloatTableau("random-" + std::to_string(index), std::move(a), b);
  }
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) a(i, j) = (family == 0 && j > i) ? 0.0 : u(rng);
  for (auto& x : b) x = u(rng);
  if (family == 1) {
    std::vector<double> c(s, 0.0);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) c[i] += a(i, j);
    Eigen::MatrixXd v(s, s);
    Eigen::VectorXd rhs(s);
    for (int k = 0; k < s; ++k) {
      for (int j = 0; j < s; ++j) v(k, j) = std::pow(c[j], k);
      rhs(k) = 1.0 / (k + 1);
    }
    const Eigen::VectorXd w = v.colPivHouseholderQr().solve(rhs);
    if ((v * w - rhs).norm() < 1e-12)
      for (int j = 0; j < s; ++j) b[j] = w(j);
  }
  return slrk::FloatTableau("random-" + std::to_string(index), std::move(a), b);
}

Outcome reduction_soundness() {
  Outcome o{true, {}};
  std::ostringstream d;
  int checked = 0, disagreements = 0;
  for (const auto& name : slrk::catalog_names())
    slrk::catalog_lookup(name).visit([&](const auto& tab) {
      ++checked;
      if (!reduction_agrees(tab)) {
        ++disagreements;
        d << "     disagreement on " << name << '\n';
      }
    });
  std::mt19937 rng(20240517);
  std::vector<int> hist(6, 0);
  for (int k = 0; k < 100; ++k) {
    const auto tab = random_tableau(rng, k);
    ++checked;
    ++hist[slrk::semilinear_order(tab, 5, 1e-10).p_sl];
    if (!reduction_agrees(tab)) {
      ++disagreements;
      d << "     disagreement on random tableau " << k << '\n';
    }
  }
  d << "     " << checked << " tableaux, " << disagreements << " disagreements; random p_SL histogram 0..5:";
  for (int h : hist) d << ' ' << h;
  d << '\n';
  o.passed = disagreements == 0;
  o.detail = d.str();
  return o;
}

Outcome v_structure() {
  double worst_inv = 0.0, worst_inc = 0.0;
  int pairs = 0;
  for (const auto& name : slrk::catalog_names())
    slrk::catalog_lookup(name).visit([&](const auto& tab) {
      using T = typename std::decay_t<decltype(tab)>::scalar_type;
      slrk::TreeSpaces<T> spaces(tab);
      for (const auto& t : slrk::enumerate_trees_up_to(5)) {
        if (t.is_leaf()) continue;
        const auto& sp = spaces.space(t);
        worst_inv = std::max(worst_inv, slrk::invariance_residual(tab, sp));
        for (const auto& v : slrk::suppressible_vertices(t)) {
          const auto sup = slrk::suppress_vertex(t, v);
          worst_inc = std::max(worst_inc, slrk::subspace_residual(sp.basis, spaces.space(sup).basis, tab.stages()));
          ++pairs;
        }
      }
    });
  Outcome o;
  o.passed = worst_inv <= 1e-10 && worst_inc <= 1e-10;
  o.detail = "     max A-invariance residual " + fmt("%.3g", worst_inv) + ", max inclusion residual " +
             fmt("%.3g", worst_inc) + " over " + std::to_string(pairs) + " suppressions\n";
  return o;
}

Outcome lte_equivalence() {
  double worst = 0.0, worst_closed = 0.0;
  int cases = 0;
  for (const char* prob : {"npr-scalar", "npr-2d"})
    for (double lambda : {-1.0, -1e3, -1e6})
      for (const auto& name : slrk::catalog_names()) {
        // The explicit method has I - A (x) Z numerically singular once |Z| is large.
        if (name == "classical-rk4" && lambda < -1.0) continue;
        const auto p = slrk::builtin_problem(prob, lambda);
        const auto tab = slrk::catalog_lookup(name);
        for (double h : {1e-2, 1e-3}) {
          slrk::LteEvaluator ev(tab, p, 0.0, h * p.J);
          const auto a = slrk::lte_series_tree(ev, 4);
          const auto b = slrk::lte_coeffs_direct(ev, 4);
          for (int i = 1; i <= 4; ++i)
            worst = std::max(worst, slrk::detail::relative_difference(a.step_coeff(i), b.step_coeff(i)));
          const auto closed = slrk::lte_order3_closed_form(tab, p, 0.0, h * p.J);
          for (int i = 1; i <= 3; ++i) {
            worst_closed = std::max(worst_closed, slrk::detail::relative_difference(a.step_coeff(i), closed[i - 1]));
            worst_closed = std::max(worst_closed, slrk::detail::relative_difference(b.step_coeff(i), closed[i - 1]));
          }
          ++cases;
        }
      }
  Outcome o;
  o.passed = worst <= 1e-10 && worst_closed <= 1e-12;
  o.detail = "     " + std::to_string(cases) + " cases (classical-rk4 only at lambda = -1); tree vs direct max rel " +
             fmt("%.3g", worst) + ", vs closed form max rel " + fmt("%.3g", worst_closed) + '\n';
  return o;
}

Outcome abstract_oracle() {
  int passed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = slrk::abstract_recursion_run(3, seed, 5, 1e-10);
    passed += r.passed;
    worst = std::max(worst, r.max_relative_difference);
  }
  return {passed == 50, "     " + std::to_string(passed) + "/50 seeds, max rel " + fmt("%.3g", worst) + '\n'};
}

Outcome one_step_uniformity() {
  const auto tab = slrk::catalog_lookup("trapezoid").to_float();
  std::vector<double> hs;
  for (int k = 0; k < 7; ++k) hs.push_back(0.1 * std::ldexp(1.0, -k));
  Outcome o{true, {}};
  std::ostringstream d;
  double lo = INFINITY, hi = 0.0;
  for (double lambda : {-1.0, -1e3, -1e6}) {
    const auto p = slrk::builtin_problem("npr-scalar", lambda);
    std::vector<double> errs;
    for (double h : hs) errs.push_back(slrk::one_step_error(tab, p, 0.0, h).norm());
    const auto f = slrk::estimate_order(errs, hs, 100.0 * std::numeric_limits<double>::epsilon() * p.y(0.0).norm());
    o.passed = o.passed && f.slope >= 2.85;
    lo = std::min(lo, f.constant);
    hi = std::max(hi, f.constant);
    d << "     lambda " << fmt("%.0e", lambda) << ": slope " << fmt("%.3f", f.slope) << ", constant "
      << fmt("%.3g", f.constant) << '\n';
  }
  d << "     constant ratio max/min " << fmt("%.3g", hi / lo) << " (limit 10)\n";
  o.passed = o.passed && hi / lo <= 10.0;
  o.detail = d.str();
  return o;
}

Outcome global_convergence() {
  struct Row {
    const char* method;
    int q;
    const char* branch;
  };
  const std::vector<Row> rows = {
      {"backward-euler", 1, "base"}, {"trapezoid", 2, "base"}, {"implicit-midpoint", 2, "superconvergence"}};
  const std::vector<double> lambdas = {-1e2, -1e4, -1e6};
  Outcome o{true, {}};
  std::ostringstream d;
  const auto mid_r = slrk::check_R_condition(*slrk::catalog_lookup("implicit-midpoint").rational());
  const auto g2_r = slrk::check_R_condition(slrk::catalog_lookup("gauss-2").to_float());
  d << "     R-condition: implicit-midpoint " << slrk::to_string(mid_r.verdict) << ", gauss-2 "
    << slrk::to_string(g2_r.verdict) << '\n';
  o.passed = mid_r.verdict == slrk::Verdict::holds && g2_r.verdict == slrk::Verdict::fails;
  for (const auto& row : rows)
    for (const char* prob : {"npr-scalar", "npr-2d"}) {
      const auto st = slrk::run_study(slrk::catalog_lookup(row.method), prob, slrk::default_h_grid(), lambdas);
      const bool predicted_ok = st.predicted.q == row.q && st.predicted.branch == row.branch;
      o.passed = o.passed && predicted_ok;
      d << "     " << row.method << " / " << prob << ": predicted q " << st.predicted.q << " (" << st.predicted.branch
        << ")" << (predicted_ok ? "" : " MISMATCH") << ", observed";
      for (const auto& f : st.fits) {
        const bool ok = f.ok && std::abs(f.fit.slope - row.q) <= 0.2;
        o.passed = o.passed && ok;
        d << ' ' << (f.ok ? fmt("%.3f", f.fit.slope) : std::string("n/a")) << (ok ? "" : "!");
      }
      const auto u = slrk::uniformity_report(st, row.q);
      const bool uniform = std::isfinite(u.ratio) && u.ratio <= 10.0;
      o.passed = o.passed && uniform;
      d << ", constants";
      for (double c : u.constants) d << ' ' << fmt("%.3g", c);
      d << ", ratio " << fmt("%.3g", u.ratio) << (uniform ? "" : " (limit 10)") << '\n';
    }
  o.detail = d.str();
  return o;
}

Outcome c_stability() {
  const auto tab = slrk::catalog_lookup("trapezoid").to_float();
  const double t = 0.3, h = 0.01, delta = 1e-4;
  double lo = INFINITY, hi = 0.0;
  std::ostringstream d;
  d << "     ||Lambda_n d||/||d|| at t = 0.3, h = 0.01, perturbation 1e-4:";
  for (double lambda : {-1e2, -1e4, -1e6, -1e8}) {
    const auto p = slrk::builtin_problem("npr-scalar", lambda);
    const slrk::Vector y = p.y(t);
    const double r = slrk::c_stability_probe(tab, p, t, y, y + slrk::Vector::Constant(p.N, delta), h);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    d << ' ' << fmt("%.3g", r);
  }
  d << "\n     max/min " << fmt("%.3g", hi / lo) << " (limit 10)\n";
  return {lo > 0.0 && hi / lo <= 10.0, d.str()};
}

Outcome nevanlinna() {
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> expo(-2.0, 6.0);
  int tableaux = 0, trials = 0, held = 0;
  double worst_margin = -INFINITY;
  for (const auto& name : slrk::catalog_names()) {
    const auto t = slrk::catalog_lookup(name);
    const auto asi = t.visit([](const auto& tab) { return slrk::check_ASI_stability(tab); });
    if (asi.verdict != slrk::Verdict::holds) continue;
    ++tableaux;
    const auto f = t.to_float();
    for (int k = 0; k < 100; ++k) {
      const int n = dim(rng);
      Eigen::MatrixXd m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = g(rng);
      m -= (slrk::log_norm(m) + std::abs(g(rng))) * Eigen::MatrixXd::Identity(n, n);
      m *= std::pow(10.0, expo(rng));
      const auto r = slrk::nevanlinna_probe(f, m, asi.sup);
      ++trials;
      held += r.holds;
      worst_margin = std::max(worst_margin, r.kron_norm - r.boundary_sup);
    }
  }
  return {tableaux > 0 && held == trials,
          "     " + std::to_string(tableaux) + " ASI-stable tableaux, " + std::to_string(held) + "/" +
              std::to_string(trials) + " hold, max(norm - sup) " + fmt("%.3g", worst_margin) + '\n'};
}

}  // namespace

int main() {
  run(1, "tree census", 1, tree_census);
  run(2, "order-condition checker", 5, order_checker);
  run(3, "reduction soundness", 60, reduction_soundness);
  run(4, "V_tau structure", 30, v_structure);
  run(5, "LTE equivalence", 30, lte_equivalence);
  run(6, "abstract recursion oracle", 10, abstract_oracle);
  run(7, "one-step stiff uniformity", 60, one_step_uniformity);
  run(8, "global convergence", 300, global_convergence);
  run(9, "C-stability probe", 30, c_stability);
  run(10, "Nevanlinna property", 30, nevanlinna);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
