#include "slrk/catalog.hpp"
#include "slrk/fit.hpp"
#include "slrk/solver.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace {

using slrk::Vector;

// y' = lambda y with y(0) = 1.
slrk::SemilinearProblem linear_scalar(double lambda) {
  slrk::SemilinearProblem p;
  p.name = "linear";
  p.lambda = lambda;
  p.N = 1;
  p.J = slrk::DenseMatrix::Constant(1, 1, lambda);
  p.g_derivative = [](int, const Vector&, const std::vector<Vector>&) { return Vector(Vector::Zero(1)); };
  p.g_jacobian = [](const Vector&) { return slrk::DenseMatrix(slrk::DenseMatrix::Zero(1, 1)); };
  p.exact = [lambda](int k, double t) { return Vector(Vector::Constant(1, std::pow(lambda, k) * std::exp(lambda * t))); };
  return p;
}

double stability_value(const slrk::ButcherTableau& t, double z) {
  return t.visit([z](const auto& tab) { return slrk::stability_function(tab)(z).real(); });
}

const std::vector<std::string> implicit_names = {"backward-euler", "implicit-midpoint", "trapezoid",  "gauss-2",
                                                 "gauss-3",        "radau-iia-2",       "radau-iia-3", "sdirk-norsett-3"};

TEST(Solver, LinearStepIsStabilityFunction) {
  for (const auto& name : slrk::catalog_names()) {
    const auto t = slrk::catalog_lookup(name);
    for (double z : {-0.5, -3.0, -40.0}) {
      if (name == "classical-rk4" && z < -2.0) continue;
      const auto p = linear_scalar(z / 0.1);
      const auto st = slrk::rk_step(t.to_float(), p, 0.0, Vector::Ones(1), 0.1);
      EXPECT_NEAR(st.y_next(0), stability_value(t, z), 1e-14) << name << " z=" << z;
    }
  }
}

TEST(Solver, LinearIntegrationIsPowerOfR) {
  for (const auto& name : implicit_names) {
    const auto t = slrk::catalog_lookup(name);
    const auto p = linear_scalar(-200.0);
    const auto tr = slrk::integrate(t.to_float(), p, 0.0, 1.0, 0.05);
    EXPECT_EQ(tr.states.size(), 21u);
    EXPECT_NEAR(tr.states.back()(0), std::pow(stability_value(t, -10.0), 20), 1e-12) << name;
  }
}

TEST(Solver, ZeroStep) {
  const auto p = slrk::builtin_problem("npr-2d", -10.0);
  const auto t = slrk::catalog_lookup("radau-iia-3").to_float();
  const Vector y = p.y(0.2);
  const auto st = slrk::rk_step(t, p, 0.2, y, 0.0);
  EXPECT_EQ(st.y_next, y);
  for (std::size_t i = 0; i < t.stages(); ++i) EXPECT_EQ(Vector(st.stages.segment(2 * i, 2)), y);
  const auto tr = slrk::integrate(t, p, 0.5, 0.5, 0.1);
  EXPECT_EQ(tr.states.size(), 1u);
  EXPECT_EQ(tr.states.front(), p.y(0.5));
}

TEST(Solver, StiffBackwardEulerConvergesQuickly) {
  const auto p = slrk::builtin_problem("npr-scalar", -1e6);
  const auto st = slrk::rk_step(slrk::catalog_lookup("backward-euler").to_float(), p, 0.0, p.y(0.0), 0.1);
  EXPECT_LE(st.iterations.at(0), 5);
  EXPECT_TRUE(st.converged.at(0));
}

TEST(Solver, ReportedResidualWithinTolerance) {
  const slrk::NewtonConfig cfg;
  for (const auto& name : implicit_names)
    for (const char* prob : {"npr-scalar", "npr-2d", "mol-reaction-diffusion"}) {
      const auto p = slrk::builtin_problem(prob, -1e4);
      const auto st = slrk::rk_step(slrk::catalog_lookup(name).to_float(), p, 0.1, p.y(0.1), 0.05, cfg);
      for (double r : st.residuals) EXPECT_LE(r, cfg.atol * std::sqrt(double(p.N)) + cfg.rtol * st.y_next.norm()) << name;
      // the stage relation holds with the recovered derivatives
      const auto t = slrk::catalog_lookup(name).to_float();
      const auto n = static_cast<Eigen::Index>(p.N);
      for (std::size_t i = 0; i < t.stages(); ++i) {
        Vector rhs = p.y(0.1);
        for (std::size_t j = 0; j < t.stages(); ++j) rhs += t.A()(i, j) * st.stage_derivatives.segment(j * n, n);
        EXPECT_LE((Vector(st.stages.segment(i * n, n)) - rhs).norm(), 1e-11) << name << " " << prob;
      }
    }
}

TEST(Solver, DirkAndBlockPathsAgree) {
  for (const char* name : {"backward-euler", "implicit-midpoint", "trapezoid", "sdirk-norsett-3"})
    for (double lambda : {-1.0, -1e3, -1e6}) {
      const auto p = slrk::builtin_problem("npr-2d", lambda);
      const auto t = slrk::catalog_lookup(name).to_float();
      ASSERT_EQ(t.structure(), slrk::Structure::dirk) << name;
      slrk::NewtonConfig block;
      block.force_block = true;
      const auto a = slrk::rk_step(t, p, 0.3, p.y(0.3), 0.1);
      const auto b = slrk::rk_step(t, p, 0.3, p.y(0.3), 0.1, block);
      EXPECT_LE((a.y_next - b.y_next).norm(), 1e-11) << name << " " << lambda;
    }
}

TEST(Solver, FiniteDifferenceJacobianSameFixedPoint) {
  const auto p = slrk::builtin_problem("mol-reaction-diffusion", -100.0);
  slrk::NewtonConfig fd;
  fd.jacobian = slrk::JacobianMode::finite_difference;
  const auto t = slrk::catalog_lookup("radau-iia-2").to_float();
  const auto a = slrk::rk_step(t, p, 0.0, p.y(0.0), 0.05);
  const auto b = slrk::rk_step(t, p, 0.0, p.y(0.0), 0.05, fd);
  EXPECT_LE((a.y_next - b.y_next).norm(), 1e-11);
}

TEST(Solver, TrapezoidGlobalError) {
  const auto p = slrk::builtin_problem("npr-scalar", -1e3);
  const auto tr = slrk::integrate(slrk::catalog_lookup("trapezoid").to_float(), p, 0.0, 1.0, 0.01);
  EXPECT_DOUBLE_EQ(tr.times.back(), 1.0);
  EXPECT_LE((tr.states.back() - p.y(1.0)).norm(), 1e-4);
}

TEST(Solver, Deterministic) {
  const auto p = slrk::builtin_problem("npr-2d", -1e4);
  const auto t = slrk::catalog_lookup("gauss-2").to_float();
  const auto a = slrk::integrate(t, p, 0.0, 1.0, 1.0 / 64);
  const auto b = slrk::integrate(t, p, 0.0, 1.0, 1.0 / 64);
  EXPECT_EQ(a.states.back(), b.states.back());
  EXPECT_EQ(a.newton_iterations, b.newton_iterations);
}

TEST(Solver, GridAndArgumentErrors) {
  const auto p = slrk::builtin_problem("npr-scalar", -1.0);
  const auto t = slrk::catalog_lookup("trapezoid").to_float();
  EXPECT_THROW(slrk::integrate(t, p, 0.0, 1.0, 0.3), std::invalid_argument);
  EXPECT_THROW(slrk::integrate(t, p, 0.0, 1.0, -0.1), std::invalid_argument);
  EXPECT_NO_THROW(slrk::integrate(t, p, 0.0, 1.0, 0.1));
  EXPECT_EQ(slrk::step_count(0.0, 1.0, 0.01), 100);
  slrk::NewtonConfig bad;
  bad.max_iterations = 0;
  EXPECT_THROW(slrk::rk_step(t, p, 0.0, p.y(0.0), 0.1, bad), std::invalid_argument);
}

TEST(Solver, NewtonFailureReportsStage) {
  const auto p = slrk::builtin_problem("npr-2d", -1.0);
  slrk::NewtonConfig cfg;
  cfg.max_iterations = 1;
  try {
    slrk::rk_step(slrk::catalog_lookup("sdirk-norsett-3").to_float(), p, 0.0, p.y(0.0), 0.5, cfg);
    FAIL() << "expected a Newton failure";
  } catch (const slrk::SolverError& e) {
    EXPECT_EQ(e.stage(), 0);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(Solver, OneStepErrorOrders) {
  std::vector<double> hs, be, tz;
  const auto p = slrk::builtin_problem("npr-scalar", -1.0);
  for (double h = 0.1; h > 1e-3; h /= 2) {
    hs.push_back(h);
    be.push_back(slrk::one_step_error(slrk::catalog_lookup("backward-euler").to_float(), p, 0.3, h).norm());
    tz.push_back(slrk::one_step_error(slrk::catalog_lookup("trapezoid").to_float(), p, 0.3, h).norm());
  }
  EXPECT_NEAR(slrk::estimate_order(be, hs).slope, 2.0, 0.1);
  EXPECT_GE(slrk::estimate_order(tz, hs, 1e-14).slope, 2.85);
  EXPECT_LE(slrk::one_step_error(slrk::catalog_lookup("trapezoid").to_float(), p, 0.3, 1e-6).norm(), 1e-15);
}

TEST(Solver, CStabilityProbe) {
  const auto t = slrk::catalog_lookup("trapezoid").to_float();
  {
    const auto p = linear_scalar(-1e4);
    EXPECT_LE(slrk::c_stability_probe(t, p, 0.0, Vector::Ones(1), Vector::Constant(1, 1.5), 0.01), 1e-12);
  }
  const auto p = slrk::builtin_problem("npr-scalar", -100.0);
  const Vector y = p.y(0.3);
  const double a = slrk::c_stability_probe(t, p, 0.3, y, y + Vector::Constant(1, 1e-4), 0.01);
  const double b = slrk::c_stability_probe(t, p, 0.3, y, y + Vector::Constant(1, 1e-8), 0.01);
  EXPECT_NEAR(a / b, 1.0, 0.1);
  EXPECT_THROW(slrk::c_stability_probe(t, p, 0.3, y, y, 0.01), std::invalid_argument);
}

TEST(Solver, TrajectoryCsv) {
  const auto p = slrk::builtin_problem("npr-2d", -1.0);
  const auto tr = slrk::integrate(slrk::catalog_lookup("trapezoid").to_float(), p, 0.0, 0.5, 0.25);
  std::ostringstream os;
  slrk::write_trajectory_csv(os, tr);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,y1,y2,newton");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

}  // namespace
