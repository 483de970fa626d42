#pragma once

// Convergence studies over (h, lambda) grids, observed orders, constants
// across stiffness, and the predicted global order.

#include "slrk/conditions.hpp"
#include "slrk/fit.hpp"
#include "slrk/problems.hpp"
#include "slrk/solver.hpp"
#include "slrk/stability.hpp"
#include "slrk/tableau.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace slrk {

struct PredictedOrder {
  int q = 0;
  int classical = 0;
  int p_sl = 0;
  Verdict r_condition = Verdict::inconclusive;
  /// "superconvergence" or "base".
  std::string branch;
  std::string explanation;
};

/// q = p_SL + 1 when p = p_SL + 1 and the R-condition holds, otherwise q = p_SL.
/// An inconclusive R-condition verdict takes the base branch.
inline PredictedOrder predicted_order(const ButcherTableau& tab, double tol = default_tol) {
  PredictedOrder out;
  tab.visit([&](const auto& t) {
    out.classical = classical_order(t, tol).order;
    out.p_sl = semilinear_order(t, 5, tol).p_sl;
    out.r_condition = check_R_condition(t).verdict;
  });
  const bool one_above = out.classical == out.p_sl + 1;
  if (one_above && out.r_condition == Verdict::holds) {
    out.q = out.p_sl + 1;
    out.branch = "superconvergence";
    out.explanation = "p = " + std::to_string(out.classical) + " = p_SL + 1 and the R-condition holds";
  } else {
    out.q = out.p_sl;
    out.branch = "base";
    if (!one_above)
      out.explanation = "p = " + std::to_string(out.classical) + " != p_SL + 1 = " + std::to_string(out.p_sl + 1);
    else
      out.explanation = "p = p_SL + 1 but the R-condition " + std::string(to_string(out.r_condition));
  }
  return out;
}

struct StudyConfig {
  NewtonConfig newton;
  double t0 = 0.0;
  double tf = 1.0;
  /// Worker threads; 0 means hardware concurrency.
  unsigned jobs = 0;
};

struct StudyCell {
  double lambda = 0.0;
  double h = 0.0;
  /// ||y(tf) - y_n|| / sqrt(N); NaN for failed cells.
  double error = std::numeric_limits<double>::quiet_NaN();
  int newton_total = 0;
  bool failed = false;
  std::string message;
};

struct LambdaFit {
  double lambda = 0.0;
  bool ok = false;
  OrderFit fit;
  std::string message;
};

struct ConvergenceStudy {
  std::string tableau;
  std::string problem;
  double t0 = 0.0, tf = 1.0;
  std::vector<double> hs;
  std::vector<double> lambdas;
  /// Lambda-major: cells[li * hs.size() + hi].
  std::vector<StudyCell> cells;
  std::vector<LambdaFit> fits;
  PredictedOrder predicted;
  Verdict a_stable = Verdict::inconclusive;
  Verdict asi_stable = Verdict::inconclusive;

  const StudyCell& cell(std::size_t li, std::size_t hi) const { return cells.at(li * hs.size() + hi); }
};

/// Geometric grid span * 2^{-lo} .. span * 2^{-hi}.
inline std::vector<double> default_h_grid(double span = 1.0, int lo = 3, int hi = 12) {
  std::vector<double> hs;
  for (int k = lo; k <= hi; ++k) hs.push_back(std::ldexp(span, -k));
  return hs;
}

namespace detail {

template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body&& body) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

inline double saturation_floor(const SemilinearProblem& p, double tf) {
  return 100.0 * std::numeric_limits<double>::epsilon() * p.y(tf).norm() / std::sqrt(static_cast<double>(p.N));
}

}  // namespace detail

/// Integrates every (h, lambda) cell from the exact initial value and records
/// the scaled final-time error. Cell failures are recorded, not thrown.
inline ConvergenceStudy run_study(const ButcherTableau& tab, const std::string& problem,
                                  const std::vector<double>& hs, const std::vector<double>& lambdas,
                                  const StudyConfig& cfg = {}) {
  if (hs.empty()) throw std::invalid_argument("step-size grid is empty");
  if (lambdas.empty()) throw std::invalid_argument("lambda grid is empty");
  for (double l : lambdas) builtin_problem(problem, l);  // validates the name and every lambda up front
  ConvergenceStudy st;
  st.tableau = tab.name();
  st.problem = problem;
  st.t0 = cfg.t0;
  st.tf = cfg.tf;
  st.hs = hs;
  st.lambdas = lambdas;
  st.predicted = predicted_order(tab);
  tab.visit([&](const auto& t) {
    st.a_stable = check_A_stability(t).verdict;
    st.asi_stable = check_ASI_stability(t).verdict;
  });
  const FloatTableau ft = tab.to_float();
  st.cells.resize(hs.size() * lambdas.size());
  detail::parallel_for(st.cells.size(), cfg.jobs, [&](std::size_t idx) {
    StudyCell& c = st.cells[idx];
    c.lambda = lambdas[idx / hs.size()];
    c.h = hs[idx % hs.size()];
    try {
      const auto p = builtin_problem(problem, c.lambda);
      const auto tr = integrate(ft, p, cfg.t0, cfg.tf, c.h, cfg.newton);
      c.error = (tr.states.back() - p.y(cfg.tf)).norm() / std::sqrt(static_cast<double>(p.N));
      c.newton_total = tr.total_newton();
    } catch (const std::exception& e) {
      c.failed = true;
      c.message = e.what();
    }
  });
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    LambdaFit f;
    f.lambda = lambdas[li];
    std::vector<double> errs;
    for (std::size_t hi = 0; hi < hs.size(); ++hi) errs.push_back(st.cell(li, hi).error);
    try {
      f.fit = estimate_order(errs, hs, detail::saturation_floor(builtin_problem(problem, f.lambda), cfg.tf));
      f.ok = true;
    } catch (const std::exception& e) {
      f.message = e.what();
    }
    st.fits.push_back(f);
  }
  return st;
}

struct UniformityReport {
  int q = 0;
  std::vector<double> lambdas;
  /// C_lambda in error ~ C_lambda h^q; NaN where no usable point exists.
  std::vector<double> constants;
  double ratio = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares constants with the slope fixed at q (default: the predicted
/// order), using the same saturation filter as the order fits.
inline UniformityReport uniformity_report(const ConvergenceStudy& st, int q = -1) {
  UniformityReport rep;
  rep.q = q >= 0 ? q : st.predicted.q;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t li = 0; li < st.lambdas.size(); ++li) {
    const double floor = detail::saturation_floor(builtin_problem(st.problem, st.lambdas[li]), st.tf);
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < st.hs.size(); ++k) {
      const double e = st.cell(li, k).error;
      if (!std::isfinite(e) || e <= floor) continue;
      sum += std::log(e) - rep.q * std::log(st.hs[k]);
      ++n;
    }
    const double c = n ? std::exp(sum / n) : std::numeric_limits<double>::quiet_NaN();
    rep.lambdas.push_back(st.lambdas[li]);
    rep.constants.push_back(c);
    if (std::isfinite(c)) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  if (hi > 0.0) rep.ratio = hi / lo;
  return rep;
}

/// "lambda,h,error,newton_total" rows; failed cells carry error "nan".
inline void write_study_csv(std::ostream& os, const ConvergenceStudy& st) {
  os << "lambda,h,error,newton_total\n";
  char buf[128];
  for (const auto& c : st.cells) {
    if (c.failed)
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,nan,%d\n", c.lambda, c.h, c.newton_total);
    else
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", c.lambda, c.h, c.error, c.newton_total);
    os << buf;
  }
}

inline std::vector<StudyCell> read_study_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "lambda,h,error,newton_total")
    throw std::runtime_error("study table: unexpected header");
  std::vector<StudyCell> cells;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 4) throw std::runtime_error("study table line " + std::to_string(lineno) + ": expected 4 fields");
    StudyCell c;
    try {
      c.lambda = std::stod(f[0]);
      c.h = std::stod(f[1]);
      c.failed = f[2] == "nan";
      if (!c.failed) c.error = std::stod(f[2]);
      c.newton_total = std::stoi(f[3]);
    } catch (const std::exception&) {
      throw std::runtime_error("study table line " + std::to_string(lineno) + ": bad number");
    }
    cells.push_back(c);
  }
  return cells;
}

inline nlohmann::json study_summary(const ConvergenceStudy& st) {
  nlohmann::json j;
  j["tableau"] = st.tableau;
  j["problem"] = st.problem;
  j["t0"] = st.t0;
  j["tf"] = st.tf;
  j["predicted_q"] = st.predicted.q;
  j["classical_order"] = st.predicted.classical;
  j["p_sl"] = st.predicted.p_sl;
  j["r_condition"] = to_string(st.predicted.r_condition);
  j["branch"] = st.predicted.branch;
  j["branch_explanation"] = st.predicted.explanation;
  j["a_stable"] = to_string(st.a_stable);
  j["asi_stable"] = to_string(st.asi_stable);
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : st.fits) {
    nlohmann::json e;
    e["lambda"] = f.lambda;
    if (f.ok) {
      e["observed_order"] = f.fit.slope;
      e["fit_residual"] = f.fit.residual;
      e["points_used"] = f.fit.used.size();
    } else {
      e["observed_order"] = nullptr;
      e["message"] = f.message;
    }
    fits.push_back(e);
  }
  j["fits"] = fits;
  const auto u = uniformity_report(st);
  j["uniformity_q"] = u.q;
  j["uniformity_constants"] = u.constants;
  j["uniformity_ratio"] = std::isfinite(u.ratio) ? nlohmann::json(u.ratio) : nlohmann::json(nullptr);
  std::size_t failed = 0;
  for (const auto& c : st.cells) failed += c.failed;
  j["failed_cells"] = failed;
  return j;
}

}  // namespace slrk
