#include "slrk/catalog.hpp"
#include "slrk/harness.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdio>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI with the given arguments; stderr is merged when asked.
Run cli(const std::string& args, bool merge_stderr = false) {
  std::string cmd = std::string("\"") + SLRK_CLI_PATH + "\" " + args + (merge_stderr ? " 2>&1" : " 2>/dev/null");
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

int data_rows(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  int rows = -1;  // header
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  return rows;
}

TEST(Cli, AnalyzeBackwardEuler) {
  const auto r = cli("analyze --catalog backward-euler --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["p_sl"], 1);
  EXPECT_EQ(j["predicted_q"], 1);
  EXPECT_EQ(j["a_stability"], "holds");
  EXPECT_EQ(j["as_stability"], "holds");
  EXPECT_EQ(j["asi_stability"], "holds");
}

TEST(Cli, AnalyzeImplicitMidpoint) {
  const auto r = cli("analyze --catalog implicit-midpoint --format json --no-reduction");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["p_sl"], 1);
  EXPECT_EQ(j["p_sl_no_reduction"], 1);
  EXPECT_EQ(j["predicted_q"], 2);
  EXPECT_EQ(j["branch"], "superconvergence");
  const auto t = cli("analyze --catalog implicit-midpoint");
  EXPECT_NE(t.out.find("superconvergence"), std::string::npos);
}

TEST(Cli, AnalyzeFileSourceAndErrors) {
  const std::string path = std::string(SLRK_SOURCE_DIR) + "/data/tableaux/lobatto-iiic-2.json";
  const auto ok = cli("analyze --format json --file \"" + path + "\"");
  ASSERT_EQ(ok.code, 0);
  EXPECT_EQ(nlohmann::json::parse(ok.out)["mode"], "rational");
  const auto missing = cli("analyze --file missing.tab", true);
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.out.find("missing.tab"), std::string::npos);
  EXPECT_EQ(cli("analyze").code, 2);
  EXPECT_EQ(cli("analyze --catalog trapezoid --file x.json").code, 2);
  EXPECT_EQ(cli("analyze --catalog no-such-method").code, 2);
  EXPECT_EQ(cli("analyze --catalog trapezoid --format xml").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("analyze --catalog backward-euler --require-order 2").code, 1);
  EXPECT_EQ(cli("analyze --catalog trapezoid --require-order 2").code, 0);
}

TEST(Cli, Trees) {
  EXPECT_EQ(data_rows(cli("trees --max-order 5 --format csv").out), 17);
  EXPECT_EQ(data_rows(cli("trees --max-order 5 --slca-only --format csv").out), 9);
  const auto one = cli("trees --max-order 1 --format csv");
  EXPECT_EQ(data_rows(one.out), 1);
  EXPECT_NE(one.out.find("1,[],yes,1"), std::string::npos);
  const auto table = cli("trees --max-order 5");
  EXPECT_EQ(data_rows(table.out), 17);
  EXPECT_EQ(cli("trees --max-order 0").code, 2);
  EXPECT_EQ(cli("trees --max-order 99").code, 2);
}

TEST(Cli, StabilityReportsWitness) {
  const auto r = cli("stability --catalog gauss-2 --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["r_condition"]["verdict"], "fails");
  EXPECT_TRUE(j["r_condition"]["witness"]["at_infinity"].get<bool>());
  const auto rk4 = nlohmann::json::parse(cli("stability --catalog classical-rk4 --format json").out);
  EXPECT_EQ(rk4["a_stability"]["verdict"], "fails");
  EXPECT_TRUE(rk4["a_stability"].contains("witness"));
}

TEST(Cli, LteVerify) {
  const auto r = cli("lte-verify --catalog trapezoid --problem npr-2d --lambda -1e6 --h 0.01 --format json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["orders"].size(), 4u);
  EXPECT_EQ(cli("lte-verify --catalog trapezoid --max-order 9").code, 2);
}

TEST(Cli, Integrate) {
  const auto r = cli("integrate --catalog radau-iia-2 --problem npr-2d --lambda -1e4 --h 0.125 --format csv");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "t,y1,y2,newton");
  EXPECT_EQ(data_rows(r.out), 9);
  EXPECT_EQ(cli("integrate --catalog trapezoid --h 0.3").code, 2);
  EXPECT_EQ(cli("integrate --catalog trapezoid --lambda 5").code, 2);
}

TEST(Cli, ConvergeGates) {
  EXPECT_EQ(cli("converge --catalog trapezoid --problem npr-scalar --lambdas -1e2,-1e6 --require-order 2").code, 0);
  EXPECT_EQ(cli("converge --catalog backward-euler --require-order 2").code, 1);
  EXPECT_EQ(cli("converge --catalog trapezoid --h-grid empty").code, 2);
  EXPECT_EQ(cli("converge --catalog trapezoid --h-grid \"\"").code, 2);
  EXPECT_EQ(cli("converge --catalog trapezoid --lambdas 1,2").code, 2);
}

// The CLI is a thin adapter: its table equals the library study bit for bit.
TEST(Cli, ConvergeMatchesLibraryAndRoundTrips) {
  const auto r = cli("converge --catalog gauss-2 --problem npr-2d --lambdas -1e3,-1 --h-grid pow2:3:7 --format csv --jobs 3");
  ASSERT_EQ(r.code, 0);
  std::istringstream is(r.out);
  const auto cells = slrk::read_study_csv(is);
  const auto st = slrk::run_study(slrk::catalog_lookup("gauss-2"), "npr-2d", slrk::default_h_grid(1.0, 3, 7), {-1e3, -1.0});
  ASSERT_EQ(cells.size(), st.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].lambda, st.cells[i].lambda);
    EXPECT_EQ(cells[i].h, st.cells[i].h);
    EXPECT_EQ(cells[i].error, st.cells[i].error);
    EXPECT_EQ(cells[i].newton_total, st.cells[i].newton_total);
  }
  const auto j = nlohmann::json::parse(
      cli("converge --catalog gauss-2 --problem npr-2d --lambdas -1e3,-1 --h-grid pow2:3:7 --format json").out);
  EXPECT_EQ(j.dump(), slrk::study_summary(st).dump());
}

TEST(Cli, ConvergeWritesFiles) {
  const std::string prefix = testing::TempDir() + "slrk_cli_study";
  ASSERT_EQ(cli("converge --catalog trapezoid --lambdas -10 --h-grid pow2:3:6 --output \"" + prefix + "\"").code, 0);
  FILE* f = std::fopen((prefix + ".csv").c_str(), "r");
  ASSERT_NE(f, nullptr);
  std::fclose(f);
  f = std::fopen((prefix + ".json").c_str(), "r");
  ASSERT_NE(f, nullptr);
  std::fclose(f);
}

}  // namespace
