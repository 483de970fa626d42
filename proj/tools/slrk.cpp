// Command-line front end: analyze, trees, stability, lte-verify, integrate,
// converge. Exit codes: 0 success, 1 analysis failure, 2 usage error.

#include "slrk/catalog.hpp"
#include "slrk/conditions.hpp"
#include "slrk/harness.hpp"
#include "slrk/lte.hpp"
#include "slrk/problems.hpp"
#include "slrk/solver.hpp"
#include "slrk/stability.hpp"
#include "slrk/tableau.hpp"
#include "slrk/tableau_io.hpp"
#include "slrk/trees.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

// Every default in one place.
struct Defaults {
  static constexpr double tol = 1e-10;
  static constexpr int max_order = 5;
  static constexpr int lte_max_order = 4;
  static constexpr int tree_max_order = 5;
  static constexpr double lambda = -1e3;
  static constexpr double h = 1e-2;
  static constexpr double t0 = 0.0;
  static constexpr double tf = 1.0;
  static constexpr double lte_tol = 1e-10;
  static constexpr double closed_form_tol = 1e-12;
  static constexpr double order_gate_slack = 0.2;
  static inline const std::string problem = "npr-scalar";
  static inline const std::string lambdas = "-1e2,-1e4,-1e6";
  static inline const std::string h_grid = "pow2:3:12";
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string catalog, file, problem = Defaults::problem, format = "table", output;
  double tol = Defaults::tol, lambda = Defaults::lambda, h = Defaults::h, t0 = Defaults::t0, tf = Defaults::tf;
  int max_order = -1;
  std::string lambdas = Defaults::lambdas, h_grid = Defaults::h_grid;
  std::optional<double> require_order;
  bool no_reduction = false, slca_only = false;
  unsigned jobs = 0;
};

std::string fmt(double x, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string rational_str(const slrk::Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

slrk::ButcherTableau load_tableau(const Options& o) {
  if (o.catalog.empty() == o.file.empty()) throw UsageError("give exactly one of --catalog or --file");
  if (!o.catalog.empty()) {
    try {
      return slrk::catalog_lookup(o.catalog);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }
  try {
    return slrk::load_tableau_file(o.file);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad number in ") + what + ": \"" + item + "\"");
    }
    if (used != item.size()) throw UsageError(std::string("bad number in ") + what + ": \"" + item + "\"");
    out.push_back(x);
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

// "pow2:LO:HI" -> (tf - t0) 2^{-LO} .. 2^{-HI}, otherwise a comma list.
std::vector<double> parse_h_grid(const std::string& text, double span) {
  if (text.rfind("pow2:", 0) == 0) {
    int lo = 0, hi = 0;
    char extra = 0;
    if (std::sscanf(text.c_str() + 5, "%d:%d%c", &lo, &hi, &extra) != 2 || lo > hi || lo < 0 || hi > 40)
      throw UsageError("bad --h-grid \"" + text + "\" (expected pow2:LO:HI with 0 <= LO <= HI <= 40)");
    return slrk::default_h_grid(span, lo, hi);
  }
  auto hs = parse_list(text, "--h-grid");
  for (double h : hs)
    if (!(h > 0.0)) throw UsageError("--h-grid entries must be positive");
  return hs;
}

void emit(const Options& o, const std::string& text) {
  if (o.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(o.output);
  if (!out) throw UsageError("cannot write \"" + o.output + "\"");
  out << text;
}

std::string key_values(const Options& o, const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ostringstream os;
  if (o.format == "csv") {
    os << "key,value\n";
    for (const auto& [k, v] : rows) os << k << "," << v << "\n";
  } else {
    std::size_t w = 0;
    for (const auto& r : rows) w = std::max(w, r.first.size());
    for (const auto& [k, v] : rows) os << k << std::string(w + 2 - k.size(), ' ') << v << "\n";
  }
  return os.str();
}

json check_json(const slrk::CheckResult& c) {
  json j;
  j["verdict"] = slrk::to_string(c.verdict);
  j["sup"] = c.sup;
  j["samples"] = c.samples;
  if (!c.note.empty()) j["note"] = c.note;
  if (c.witness) {
    json w;
    w["at_infinity"] = c.witness->at_infinity;
    w["re"] = c.witness->z.real();
    w["im"] = c.witness->z.imag();
    w["value"] = c.witness->value;
    w["reason"] = c.witness->reason;
    j["witness"] = w;
  }
  return j;
}

int run_analyze(const Options& o) {
  const auto tab = load_tableau(o);
  const int max_order = o.max_order < 0 ? Defaults::max_order : o.max_order;
  json j;
  j["tableau"] = tab.name();
  j["mode"] = tab.mode() == slrk::Mode::rational ? "rational" : "float";
  j["stages"] = tab.stages();
  j["structure"] = slrk::to_string(tab.structure());
  tab.visit([&](const auto& t) {
    const auto so = slrk::stage_order(t, o.tol);
    const auto co = slrk::classical_order(t, o.tol);
    const auto wso = slrk::weak_stage_order(t, o.tol);
    const auto rep = slrk::semilinear_order(t, max_order, o.tol, true);
    j["stage_order"] = so.order;
    j["classical_order"] = co.order;
    j["classical_order_saturated"] = co.saturated;
    j["weak_stage_order"] = wso.order;
    j["weak_stage_order_saturated"] = wso.saturated;
    j["p_sl"] = rep.p_sl;
    j["p_sl_saturated"] = rep.saturated;
    if (o.no_reduction) j["p_sl_no_reduction"] = slrk::semilinear_order(t, max_order, o.tol, false).p_sl;
    json trees = json::array();
    for (const auto& r : rep.trees)
      trees.push_back({{"tree", r.tree.str()}, {"satisfied", r.satisfied}, {"max_residual", r.max_residual}, {"skipped", r.skipped}});
    j["trees"] = trees;
    const auto st = slrk::analyze_stability(t);
    j["a_stability"] = slrk::to_string(st.a_stable.verdict);
    j["as_stability"] = slrk::to_string(st.as_stable.verdict);
    j["asi_stability"] = slrk::to_string(st.asi_stable.verdict);
    j["r_condition"] = slrk::to_string(st.r_condition.verdict);
    j["r_at_infinity"] = st.r_at_infinity ? json(*st.r_at_infinity) : json(nullptr);
  });
  const auto q = slrk::predicted_order(tab, o.tol);
  j["predicted_q"] = q.q;
  j["branch"] = q.branch;
  j["branch_explanation"] = q.explanation;

  if (o.format == "json") {
    emit(o, j.dump(2) + "\n");
  } else {
    auto sat = [](bool s) { return s ? " (saturated)" : ""; };
    std::vector<std::pair<std::string, std::string>> rows = {
        {"tableau", j["tableau"]},
        {"mode", j["mode"]},
        {"stages", std::to_string(tab.stages())},
        {"structure", j["structure"]},
        {"stage order", std::to_string(j["stage_order"].get<int>())},
        {"classical order", std::to_string(j["classical_order"].get<int>()) + sat(j["classical_order_saturated"])},
        {"weak stage order", std::to_string(j["weak_stage_order"].get<int>()) + sat(j["weak_stage_order_saturated"])},
        {"p_SL", std::to_string(j["p_sl"].get<int>()) + sat(j["p_sl_saturated"])}};
    if (o.no_reduction) rows.push_back({"p_SL (no reduction)", std::to_string(j["p_sl_no_reduction"].get<int>())});
    rows.push_back({"A-stability", j["a_stability"]});
    rows.push_back({"AS-stability", j["as_stability"]});
    rows.push_back({"ASI-stability", j["asi_stability"]});
    rows.push_back({"R-condition", j["r_condition"]});
    rows.push_back({"R(infinity)", j["r_at_infinity"].is_null() ? "unbounded" : fmt(j["r_at_infinity"].get<double>())});
    rows.push_back({"predicted q", std::to_string(q.q) + " (" + q.branch + ": " + q.explanation + ")"});
    emit(o, key_values(o, rows));
  }
  if (o.require_order && j["p_sl"].get<int>() < *o.require_order) {
    std::cerr << "p_SL = " << j["p_sl"].get<int>() << " is below the required " << *o.require_order << "\n";
    return 1;
  }
  return 0;
}

int run_trees(const Options& o) {
  const int max_order = o.max_order < 0 ? Defaults::tree_max_order : o.max_order;
  if (max_order < 1 || max_order > slrk::max_enumeration_order)
    throw UsageError("--max-order must be in [1, " + std::to_string(slrk::max_enumeration_order) + "]");
  json rows = json::array();
  for (const auto& t : slrk::enumerate_trees_up_to(max_order)) {
    const bool slca = slrk::is_semi_lone_child_avoiding(t);
    if (o.slca_only && !slca) continue;
    rows.push_back({{"order", t.order()}, {"tree", t.str()}, {"slca", slca}, {"zeta", rational_str(slrk::zeta(t))}});
  }
  std::ostringstream os;
  if (o.format == "json") {
    os << rows.dump(2) << "\n";
  } else if (o.format == "csv") {
    os << "order,tree,slca,zeta\n";
    for (const auto& r : rows)
      os << r["order"].get<int>() << "," << r["tree"].get<std::string>() << "," << (r["slca"].get<bool>() ? "yes" : "no")
         << "," << r["zeta"].get<std::string>() << "\n";
  } else {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-5s  %-28s  %-4s  %s\n", "order", "tree", "slca", "zeta");
    os << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-5d  %-28s  %-4s  %s\n", r["order"].get<int>(), r["tree"].get<std::string>().c_str(),
                    r["slca"].get<bool>() ? "yes" : "no", r["zeta"].get<std::string>().c_str());
      os << buf;
    }
  }
  emit(o, os.str());
  return 0;
}

int run_stability(const Options& o) {
  const auto tab = load_tableau(o);
  json j;
  j["tableau"] = tab.name();
  tab.visit([&](const auto& t) {
    const auto st = slrk::analyze_stability(t);
    j["a_stability"] = check_json(st.a_stable);
    j["as_stability"] = check_json(st.as_stable);
    j["asi_stability"] = check_json(st.asi_stable);
    j["r_condition"] = check_json(st.r_condition);
    j["r_at_infinity"] = st.r_at_infinity ? json(*st.r_at_infinity) : json(nullptr);
    j["r_numerator"] = st.r_numerator;
    j["r_denominator"] = st.r_denominator;
  });
  if (o.format == "json") {
    emit(o, j.dump(2) + "\n");
    return 0;
  }
  auto poly = [](const json& coeffs) {
    std::string s;
    for (std::size_t k = 0; k < coeffs.size(); ++k) s += (k ? " " : "") + coeffs[k].get<std::string>();
    return "[" + s + "]";
  };
  std::vector<std::pair<std::string, std::string>> rows = {{"tableau", tab.name()}};
  for (const char* key : {"a_stability", "as_stability", "asi_stability", "r_condition"}) {
    const auto& c = j[key];
    std::string v = c["verdict"].get<std::string>() + " (sup " + fmt(c["sup"].get<double>()) + ")";
    if (c.contains("witness")) {
      const auto& w = c["witness"];
      v += w["at_infinity"].get<bool>() ? "; witness z = infinity"
                                         : "; witness z = " + fmt(w["re"].get<double>()) + (w["im"].get<double>() < 0 ? "" : "+") +
                                               fmt(w["im"].get<double>()) + "i";
      v += ", " + w["reason"].get<std::string>();
    }
    if (c.contains("note")) v += "; " + c["note"].get<std::string>();
    rows.push_back({key, v});
  }
  rows.push_back({"r_at_infinity", j["r_at_infinity"].is_null() ? "unbounded" : fmt(j["r_at_infinity"].get<double>())});
  rows.push_back({"R numerator (ascending)", poly(j["r_numerator"])});
  rows.push_back({"R denominator (ascending)", poly(j["r_denominator"])});
  emit(o, key_values(o, rows));
  return 0;
}

int run_lte_verify(const Options& o) {
  const auto tab = load_tableau(o);
  const auto p = slrk::builtin_problem(o.problem, o.lambda);
  const int max_order = o.max_order < 0 ? Defaults::lte_max_order : o.max_order;
  slrk::LteEvaluator ev(tab, p, o.t0, o.h * p.J);
  slrk::check_series_order(p, max_order);
  const auto a = slrk::lte_series_tree(ev, max_order);
  const auto b = slrk::lte_coeffs_direct(ev, max_order);
  const auto c = slrk::lte_order3_closed_form(tab, p, o.t0, o.h * p.J);
  bool ok = true;
  json rows = json::array();
  for (int i = 1; i <= max_order; ++i) {
    const double d = slrk::detail::relative_difference(a.step_coeff(i), b.step_coeff(i));
    json r = {{"order", i}, {"tree_norm", a.step_coeff(i).norm()}, {"direct_norm", b.step_coeff(i).norm()}, {"tree_vs_direct", d}};
    ok = ok && d <= Defaults::lte_tol;
    if (i <= 3) {
      const double e = slrk::detail::relative_difference(a.step_coeff(i), c[static_cast<std::size_t>(i - 1)]);
      r["tree_vs_closed_form"] = e;
      ok = ok && e <= Defaults::closed_form_tol;
    }
    rows.push_back(r);
  }
  std::ostringstream os;
  if (o.format == "json") {
    json j = {{"tableau", tab.name()}, {"problem", o.problem}, {"lambda", o.lambda}, {"h", o.h}, {"t0", o.t0}, {"orders", rows}, {"passed", ok}};
    os << j.dump(2) << "\n";
  } else {
    const char* sep = o.format == "csv" ? "," : "  ";
    os << "order" << sep << "tree_norm" << sep << "direct_norm" << sep << "tree_vs_direct" << sep << "tree_vs_closed_form\n";
    for (const auto& r : rows) {
      os << r["order"].get<int>() << sep << fmt(r["tree_norm"].get<double>(), "%.6e") << sep
         << fmt(r["direct_norm"].get<double>(), "%.6e") << sep << fmt(r["tree_vs_direct"].get<double>(), "%.3e") << sep
         << (r.contains("tree_vs_closed_form") ? fmt(r["tree_vs_closed_form"].get<double>(), "%.3e") : "") << "\n";
    }
    if (o.format != "csv") os << (ok ? "agreement within tolerance\n" : "DISAGREEMENT beyond tolerance\n");
  }
  emit(o, os.str());
  return ok ? 0 : 1;
}

int run_integrate(const Options& o) {
  const auto tab = load_tableau(o);
  const auto p = slrk::builtin_problem(o.problem, o.lambda);
  const auto tr = slrk::integrate(tab.to_float(), p, o.t0, o.tf, o.h);
  const double err = (tr.states.back() - p.y(o.tf)).norm() / std::sqrt(static_cast<double>(p.N));
  if (o.format == "csv") {
    std::ostringstream os;
    slrk::write_trajectory_csv(os, tr);
    emit(o, os.str());
  } else if (o.format == "json") {
    json j = {{"tableau", tab.name()}, {"problem", o.problem}, {"lambda", o.lambda}, {"h", o.h}, {"steps", tr.times.size() - 1},
              {"final_error", err}, {"newton_total", tr.total_newton()}};
    emit(o, j.dump(2) + "\n");
  } else {
    emit(o, key_values(o, {{"tableau", tab.name()},
                           {"problem", o.problem + " (lambda " + fmt(o.lambda) + ")"},
                           {"steps", std::to_string(tr.times.size() - 1)},
                           {"final error", fmt(err, "%.6e")},
                           {"newton iterations", std::to_string(tr.total_newton())}}));
  }
  return 0;
}

int run_converge(const Options& o) {
  const auto tab = load_tableau(o);
  const auto lambdas = parse_list(o.lambdas, "--lambdas");
  const auto hs = parse_h_grid(o.h_grid, o.tf - o.t0);
  slrk::StudyConfig cfg;
  cfg.t0 = o.t0;
  cfg.tf = o.tf;
  cfg.jobs = o.jobs;
  const auto st = slrk::run_study(tab, o.problem, hs, lambdas, cfg);
  const json summary = slrk::study_summary(st);
  std::ostringstream table;
  slrk::write_study_csv(table, st);
  if (!o.output.empty()) {
    std::ofstream t(o.output + ".csv"), s(o.output + ".json");
    if (!t || !s) throw UsageError("cannot write study files with prefix \"" + o.output + "\"");
    t << table.str();
    s << summary.dump(2) << "\n";
  }
  if (o.format == "csv") {
    std::cout << table.str();
  } else if (o.format == "json") {
    std::cout << summary.dump(2) << "\n";
  } else {
    std::cout << "tableau " << st.tableau << ", problem " << st.problem << ", predicted q = " << st.predicted.q << " ("
              << st.predicted.branch << ": " << st.predicted.explanation << ")\n";
    for (const auto& f : st.fits)
      std::cout << "  lambda " << fmt(f.lambda) << ": observed order "
                << (f.ok ? fmt(f.fit.slope, "%.3f") + " (fit residual " + fmt(f.fit.residual, "%.2e") + ")" : "n/a (" + f.message + ")")
                << "\n";
    const auto u = slrk::uniformity_report(st);
    std::cout << "  uniformity ratio (q = " << u.q << "): " << (std::isfinite(u.ratio) ? fmt(u.ratio) : "n/a") << "\n";
  }
  if (o.require_order) {
    for (const auto& f : st.fits)
      if (!f.ok || f.fit.slope < *o.require_order - Defaults::order_gate_slack) {
        std::cerr << "observed order below " << *o.require_order << " - " << Defaults::order_gate_slack << " at lambda "
                  << f.lambda << "\n";
        return 1;
      }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semilinear Runge-Kutta order conditions, stability and convergence"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  Options o;

  auto add_source = [&](CLI::App* sub) {
    sub->add_option("--catalog", o.catalog, "built-in tableau name");
    sub->add_option("--file", o.file, "tableau JSON file");
  };
  auto add_format = [&](CLI::App* sub) {
    sub->add_option("--format", o.format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
    sub->add_option("--output", o.output, "write output to this path instead of stdout");
  };
  auto add_problem = [&](CLI::App* sub) {
    sub->add_option("--problem", o.problem, "built-in problem name");
    sub->add_option("--t0", o.t0, "initial time");
  };

  auto* analyze = app.add_subcommand("analyze", "orders, stability verdicts and predicted global order");
  add_source(analyze);
  add_format(analyze);
  analyze->add_option("--tol", o.tol, "residual tolerance");
  analyze->add_option("--max-order", o.max_order, "highest order condition checked");
  analyze->add_flag("--no-reduction", o.no_reduction, "also report p_SL computed on all trees");
  analyze->add_option("--require-order", o.require_order, "exit 1 unless p_SL reaches this value");

  auto* trees = app.add_subcommand("trees", "rooted trees with SLCA flags and zeta factors");
  add_format(trees);
  trees->add_option("--max-order", o.max_order, "largest tree order");
  trees->add_flag("--slca-only", o.slca_only, "only semi-lone-child-avoiding trees");

  auto* stability = app.add_subcommand("stability", "stability verdicts with witnesses");
  add_source(stability);
  add_format(stability);

  auto* lte = app.add_subcommand("lte-verify", "compare the tree expansion, direct recursion and closed form");
  add_source(lte);
  add_format(lte);
  add_problem(lte);
  lte->add_option("--lambda", o.lambda, "stiffness parameter (negative)");
  lte->add_option("--h", o.h, "step size in Z = hJ");
  lte->add_option("--max-order", o.max_order, "highest series order");

  auto* integ = app.add_subcommand("integrate", "constant-step integration");
  add_source(integ);
  add_format(integ);
  add_problem(integ);
  integ->add_option("--lambda", o.lambda, "stiffness parameter (negative)");
  integ->add_option("--h", o.h, "step size");
  integ->add_option("--tf", o.tf, "final time");

  auto* conv = app.add_subcommand("converge", "convergence study over step sizes and stiffness");
  add_source(conv);
  conv->add_option("--format", o.format, "table, csv or json")->check(CLI::IsMember({"table", "csv", "json"}));
  conv->add_option("--output", o.output, "prefix for <prefix>.csv and <prefix>.json");
  add_problem(conv);
  conv->add_option("--lambdas", o.lambdas, "comma-separated lambda values");
  conv->add_option("--h-grid", o.h_grid, "comma-separated step sizes or pow2:LO:HI");
  conv->add_option("--tf", o.tf, "final time");
  conv->add_option("--require-order", o.require_order, "exit 1 unless every fitted order reaches this minus 0.2");
  conv->add_option("--jobs", o.jobs, "worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) return run_analyze(o);
    if (*trees) return run_trees(o);
    if (*stability) return run_stability(o);
    if (*lte) return run_lte_verify(o);
    if (*integ) return run_integrate(o);
    if (*conv) return run_converge(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
