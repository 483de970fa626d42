#include "slrk/catalog.hpp"
#include "slrk/tableau.hpp"
#include "slrk/tableau_io.hpp"

#include <gtest/gtest.h>

#include <cmath>

using slrk::Rational;

namespace {

slrk::RationalTableau rational(const std::string& name) { return *slrk::catalog_lookup(name).rational(); }

}  // namespace

TEST(Tableau, ParseBackwardEuler) {
  auto t = slrk::parse_tableau(R"({"name":"be","A":[["1"]],"b":["1"]})");
  ASSERT_EQ(t.mode(), slrk::Mode::rational);
  EXPECT_EQ(t.stages(), 1u);
  EXPECT_EQ(t.rational()->c()[0], 1);
  EXPECT_EQ(t.structure(), slrk::Structure::dirk);
}

TEST(Tableau, ParseRejectsWrongC) {
  try {
    slrk::parse_tableau(R"({"name":"x","A":[["1/2"]],"b":["1"],"c":["1/3"]})");
    FAIL() << "expected throw";
  } catch (const slrk::TableauError& e) {
    EXPECT_NE(std::string(e.what()).find("c mismatch"), std::string::npos);
  }
}

TEST(Tableau, ParseTrapezoid) {
  auto t = slrk::parse_tableau(R"({"name":"trap","A":[["0","0"],["1/2","1/2"]],"b":["1/2","1/2"]})");
  const auto& r = *t.rational();
  EXPECT_EQ(r.c()[0], 0);
  EXPECT_EQ(r.c()[1], 1);
  EXPECT_EQ(t.structure(), slrk::Structure::dirk);
}

TEST(Tableau, ParseErrorsCarryLocation) {
  auto msg = [](const std::string& doc) {
    try {
      slrk::parse_tableau(doc);
    } catch (const slrk::TableauError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg(R"({"A":[["1","2"],["3"]],"b":["1","0"]})").find("row 1"), std::string::npos);
  EXPECT_NE(msg(R"({"A":[["1","x"],["3","4"]],"b":["1","0"]})").find("A[0][1]"), std::string::npos);
  EXPECT_NE(msg(R"({"A":[["1"]],"b":["1","2"]})").find("dimension mismatch"), std::string::npos);
  EXPECT_NE(msg(R"({"A":[["1"]]})").find("\"b\""), std::string::npos);
  EXPECT_NE(msg("{not json").find("malformed"), std::string::npos);
  EXPECT_NE(msg(R"({"A":[["1/0"]],"b":["1"]})").find("A[0][0]"), std::string::npos);
}

TEST(Tableau, FloatModeWhenAnyDecimal) {
  auto t = slrk::parse_tableau(R"({"A":[[0.5]],"b":["1"]})");
  EXPECT_EQ(t.mode(), slrk::Mode::floating);
  EXPECT_DOUBLE_EQ(t.to_float().c()[0], 0.5);
}

TEST(Tableau, RationalRoundTripIsExact) {
  for (const auto& name : slrk::catalog_names()) {
    auto t = slrk::catalog_lookup(name);
    auto back = slrk::parse_tableau(slrk::write_tableau(t));
    ASSERT_EQ(back.mode(), t.mode()) << name;
    if (t.rational()) {
      EXPECT_EQ(back.rational()->A(), t.rational()->A());
      EXPECT_EQ(back.rational()->b(), t.rational()->b());
    } else {
      EXPECT_EQ(back.to_float().A(), t.to_float().A()) << name;
    }
  }
}

TEST(Tableau, StructureClassification) {
  EXPECT_EQ(slrk::catalog_lookup("classical-rk4").structure(), slrk::Structure::explicit_method);
  EXPECT_EQ(slrk::catalog_lookup("sdirk-norsett-3").structure(), slrk::Structure::dirk);
  EXPECT_EQ(slrk::catalog_lookup("gauss-2").structure(), slrk::Structure::fully_implicit);
  EXPECT_EQ(slrk::catalog_lookup("radau-iia-2").structure(), slrk::Structure::fully_implicit);
}

TEST(Tableau, CatalogModes) {
  EXPECT_EQ(slrk::catalog_lookup("implicit-midpoint").rational()->A()(0, 0), Rational(1, 2));
  EXPECT_EQ(slrk::catalog_lookup("gauss-2").mode(), slrk::Mode::floating);
  EXPECT_THROW(slrk::catalog_lookup("nope"), std::invalid_argument);
}

TEST(Tableau, DefectPairs) {
  auto be = rational("backward-euler");
  auto d1 = slrk::defect_pair(be, 1);
  EXPECT_EQ(d1.q_hat, 0);
  EXPECT_EQ(d1.s_hat[0], 0);
  auto d2 = slrk::defect_pair(be, 2);
  EXPECT_EQ(d2.q_hat, Rational(-1, 2));
  EXPECT_EQ(d2.s_hat[0], Rational(-1, 2));
  auto tr = slrk::defect_pair(rational("trapezoid"), 2);
  EXPECT_EQ(tr.q_hat, 0);
  EXPECT_EQ(tr.s_hat, (slrk::Vec<Rational>{0, 0}));
  EXPECT_THROW(slrk::defect_pair(be, 0), std::invalid_argument);
}

TEST(Tableau, FirstDefectVanishesAndModesAgree) {
  for (const auto& name : slrk::catalog_names()) {
    auto t = slrk::catalog_lookup(name);
    auto f = t.to_float();
    for (double x : slrk::defect_pair(f, 1).s_hat) EXPECT_NEAR(x, 0.0, 1e-15) << name;
    if (const auto* r = t.rational()) {
      for (int l = 1; l <= 6; ++l) {
        auto dr = slrk::defect_pair(*r, l);
        auto df = slrk::defect_pair(f, l);
        EXPECT_NEAR(slrk::to_double(dr.q_hat), df.q_hat, 1e-13);
        for (std::size_t i = 0; i < f.stages(); ++i) EXPECT_NEAR(slrk::to_double(dr.s_hat[i]), df.s_hat[i], 1e-13);
      }
    }
  }
}

TEST(Tableau, StageOrder) {
  EXPECT_EQ(slrk::stage_order(rational("backward-euler")).order, 1);
  EXPECT_EQ(slrk::stage_order(rational("trapezoid")).order, 2);
  EXPECT_EQ(slrk::stage_order(slrk::catalog_lookup("gauss-2").to_float()).order, 2);
  EXPECT_EQ(slrk::stage_order(slrk::catalog_lookup("gauss-3").to_float()).order, 3);
  EXPECT_EQ(slrk::stage_order(rational("radau-iia-2")).order, 2);
}

TEST(Tableau, ClassicalOrder) {
  EXPECT_EQ(slrk::classical_order(rational("backward-euler")).order, 1);
  EXPECT_EQ(slrk::classical_order(rational("implicit-midpoint")).order, 2);
  EXPECT_EQ(slrk::classical_order(rational("trapezoid")).order, 2);
  EXPECT_EQ(slrk::classical_order(rational("radau-iia-2")).order, 3);
  EXPECT_EQ(slrk::classical_order(rational("classical-rk4")).order, 4);
  EXPECT_EQ(slrk::classical_order(slrk::catalog_lookup("gauss-2").to_float(), 1e-12).order, 4);
  EXPECT_EQ(slrk::classical_order(slrk::catalog_lookup("sdirk-norsett-3").to_float(), 1e-12).order, 4);
  auto g3 = slrk::classical_order(slrk::catalog_lookup("gauss-3").to_float(), 1e-12);
  EXPECT_EQ(g3.order, 5);
  EXPECT_TRUE(g3.saturated);
  EXPECT_EQ(slrk::classical_order(slrk::catalog_lookup("radau-iia-3").to_float(), 1e-12).order, 5);
}

TEST(Tableau, ClassicalOrderImpliesQuadrature) {
  for (const auto& name : slrk::catalog_names()) {
    auto f = slrk::catalog_lookup(name).to_float();
    const int p = slrk::classical_order(f, 1e-12).order;
    for (int k = 1; k <= p; ++k) EXPECT_NEAR(slrk::defect_pair(f, k).q_hat, 0.0, 1e-12) << name << " k=" << k;
  }
}

TEST(Tableau, GaussSimplifyingAssumptions) {
  auto g = slrk::catalog_lookup("gauss-2").to_float();
  for (int k = 1; k <= 4; ++k) EXPECT_NEAR(slrk::defect_pair(g, k).q_hat, 0.0, 1e-14);
  for (int k = 1; k <= 2; ++k)
    for (double x : slrk::defect_pair(g, k).s_hat) EXPECT_NEAR(x, 0.0, 1e-14);
}
