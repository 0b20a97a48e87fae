#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "harvest/commands.hpp"
#include "support.hpp"

using harvest::cli::Options;
using harvest::cli::run;
using nlohmann::json;

namespace {

json load(const std::string& name) { return json::parse(harvest_test::read_text(harvest_test::config_path(name))); }

json small_sim(json c, std::uint64_t n_paths, double t_max = 100.0) {
  c["sim"]["n_paths"] = n_paths;
  c["sim"]["t_max"] = t_max;
  return c;
}

Options opts(std::string format = "", bool no_meta = true) {
  Options o;
  o.format = std::move(format);
  o.no_meta = no_meta;
  return o;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  ADD_FAILURE() << "missing column " << name;
  return 0;
}

int exit_status(const std::string& args) {
  const std::string cmd = std::string(HARVEST_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, MissingRhoNamesField) {
  auto c = load("bm2d.json");
  c["prices"].erase("rho");
  const auto r = run("solve", c.dump(), opts());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.error.find("prices.rho"), std::string::npos) << r.error;
}

TEST(Config, UnknownFieldNamesPath) {
  auto c = load("bm2d.json");
  c["dynamics"][1]["drift"] = 1.0;
  const auto r = run("solve", c.dump(), opts());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.error.find("dynamics[1].drift"), std::string::npos) << r.error;
}

TEST(Config, InvalidParameterNamesComponent) {
  auto c = load("bm2d.json");
  c["dynamics"][0]["sigma"] = 0.0;
  const auto r = run("solve", c.dump(), opts());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.error.find("dynamics[0]"), std::string::npos) << r.error;
}

TEST(Config, MalformedJson) {
  EXPECT_EQ(run("solve", "{\"dynamics\": [", opts()).exit_code, 1);
  EXPECT_EQ(run("solve", "[]", opts()).exit_code, 1);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* f : {"bm2d.json", "bm_threshold.json", "logistic.json"})
    EXPECT_NO_THROW(harvest::parse_config_text(harvest_test::read_text(harvest_test::config_path(f)))) << f;
}

TEST(Solve, ChatterRegimeValue) {
  const auto r = run("solve", load("bm2d.json").dump(), opts());
  ASSERT_EQ(r.exit_code, 0) << r.error;
  const auto j = json::parse(r.output);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_FALSE(j.contains("meta"));
  EXPECT_NEAR(j["value"].get<double>(), 6.0, 1e-12);
  for (const auto& c : j["components"]) EXPECT_EQ(c["regime"], "chatter_to_zero");
}

TEST(Solve, ThresholdResidualsSmall) {
  const auto r = run("solve", load("bm_threshold.json").dump(), opts());
  ASSERT_EQ(r.exit_code, 0) << r.error;
  const auto c = json::parse(r.output)["components"][0];
  EXPECT_EQ(c["regime"], "interior_threshold");
  for (const auto& [k, v] : c["residuals"].items()) EXPECT_LT(v.get<double>(), 1e-9) << k;
  EXPECT_NEAR(c["x_star"].get<double>(), harvest_test::golden()["bm"][1]["x_star"].get<double>(), 1e-10);
}

TEST(Solve, MetaBlockPresentByDefault) {
  const auto r = run("solve", load("logistic.json").dump(), opts("", false));
  ASSERT_EQ(r.exit_code, 0) << r.error;
  const auto j = json::parse(r.output);
  EXPECT_EQ(j["meta"]["tool"], "harvest_cli");
  EXPECT_TRUE(j["meta"].contains("generated_at"));
}

TEST(Solve, GeneralDynamicsUnsupported) {
  auto c = load("bm_threshold.json");
  c["dynamics"][0] = {{"kind", "general"}, {"drift", {0.0, 1.0}}, {"vol", {1.0}}};
  const auto r = run("solve", c.dump(), opts());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.error.find("no analytic solution"), std::string::npos) << r.error;
}

TEST(Simulate, RowsMatchKnownValues) {
  const auto c = small_sim(load("bm_threshold.json"), 1500);
  auto o = opts();
  o.policies = {"take_all", "no_harvest", "barrier"};
  const auto r = run("simulate", c.dump(), o);
  ASSERT_EQ(r.exit_code, 0) << r.error;
  const auto rows = csv_rows(r.output);
  ASSERT_EQ(rows.size(), 4u);
  const auto& h = rows[0];
  for (const auto& row : rows) EXPECT_EQ(row.size(), h.size());
  const auto mean = column(h, "mean"), lo = column(h, "ci_lo"), hi = column(h, "ci_hi"), an = column(h, "analytic_value");
  EXPECT_EQ(rows[1][0], "take_all");
  EXPECT_DOUBLE_EQ(std::stod(rows[1][mean]), std::sqrt(2.0));
  EXPECT_EQ(std::stod(rows[2][mean]), 0.0);
  const double v = std::stod(rows[3][an]);
  EXPECT_LE(std::stod(rows[3][lo]) - 0.02, v);  // 95% interval, small slack for the grid bias
  EXPECT_GE(std::stod(rows[3][hi]) + 0.02, v);
}

TEST(Simulate, ByteIdenticalForSameSeed) {
  const auto c = small_sim(load("bm2d.json"), 200, 5.0);
  auto o = opts();
  o.policies = {"chatter:50:0.5", "barrier@1.5"};
  const auto a = run("simulate", c.dump(), o), b = run("simulate", c.dump(), o);
  ASSERT_EQ(a.exit_code, 0) << a.error;
  EXPECT_EQ(a.output, b.output);
  o.seed = 99;
  EXPECT_NE(run("simulate", c.dump(), o).output, a.output);
}

TEST(Simulate, MultiComponentReportsBothExtinctionRules) {
  const auto c = small_sim(load("bm2d.json"), 100, 5.0);
  auto o = opts();
  o.policies = {"barrier@1.5"};
  const auto rows = csv_rows(run("simulate", c.dump(), o).output);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][1], "joint");
  EXPECT_EQ(rows[2][1], "per_component");
}

TEST(Simulate, JsonFormat) {
  const auto c = small_sim(load("bm_threshold.json"), 50, 5.0);
  auto o = opts("json");
  o.policies = {"take_all"};
  const auto j = json::parse(run("simulate", c.dump(), o).output);
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["rows"].size(), 1u);
}

TEST(Simulate, RejectsBadRequests) {
  auto c = small_sim(load("bm_threshold.json"), 10, 1.0);
  auto o = opts();
  o.policies = {"bogus"};
  EXPECT_EQ(run("simulate", c.dump(), o).exit_code, 1);
  c["x0"] = {0.0};
  o.policies = {"take_all"};
  const auto r = run("simulate", c.dump(), o);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.error.find("x0[0]"), std::string::npos);
  auto g = small_sim(load("bm_threshold.json"), 10, 1.0);
  g["dynamics"][0] = {{"kind", "general"}, {"drift", {0.0, 1.0}}, {"vol", {1.0}}};
  o.policies = {"barrier"};
  EXPECT_EQ(run("simulate", g.dump(), o).exit_code, 2);
  o.policies = {"barrier@1"};
  EXPECT_EQ(run("simulate", g.dump(), o).exit_code, 0);
}

TEST(Verify, ReportsPassAndPerturbationFailure) {
  const auto good = json::parse(run("verify", load("bm_threshold.json").dump(), opts()).output);
  EXPECT_TRUE(good["pass"].get<bool>());
  auto o = opts();
  o.threshold_scale = 1.1;
  const auto bad = json::parse(run("verify", load("bm_threshold.json").dump(), o).output);
  EXPECT_FALSE(bad["pass"].get<bool>());
  EXPECT_FALSE(bad["pasting"][0]["pass"].get<bool>());
}

TEST(Verify, ChatterCandidatePasses) {
  const auto j = json::parse(run("verify", load("bm2d.json").dump(), opts()).output);
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_EQ(j["n_in_d"], 0);
}

TEST(Verify, EmptyGridIsConfigError) {
  auto c = load("bm2d.json");
  c["verify"]["points_per_axis"] = 0;
  EXPECT_EQ(run("verify", c.dump(), opts()).exit_code, 1);
  c["verify"]["points_per_axis"] = 10;
  c["verify"]["hi"] = {0.01, 0.01};
  EXPECT_EQ(run("verify", c.dump(), opts()).exit_code, 1);
}

TEST(Verify, GridCsvHasOneRowPerPoint) {
  auto o = opts();
  o.grid_csv = true;
  auto c = load("bm2d.json");
  c["verify"]["points_per_axis"] = 7;
  const auto r = run("verify", c.dump(), o);
  const auto rows = csv_rows(r.grid_csv);
  ASSERT_EQ(rows.size(), 50u);
  for (const auto& row : rows) EXPECT_EQ(row.size(), 7u);
}

TEST(Bounds, ChatterRegimeLowerIsValue) {
  const auto j = json::parse(run("bounds", load("bm2d.json").dump(), opts()).output);
  EXPECT_NEAR(j["lower"].get<double>(), j["analytic_value"].get<double>(), 1e-12);
}

TEST(Bounds, ZeroStateLowerIsZero) {
  auto c = load("bm_threshold.json");
  c["x0"] = {0.0};
  const auto j = json::parse(run("bounds", c.dump(), opts()).output);
  EXPECT_EQ(j["lower"].get<double>(), 0.0);
}

TEST(Bounds, MonteCarloUpperInsideBracket) {
  auto o = opts();
  o.with_mc = true;
  const auto j = json::parse(run("bounds", small_sim(load("bm_threshold.json"), 300, 50.0).dump(), o).output);
  const double lo = j["lower"], up = j["upper_conservative"], mc = j["upper_mc"];
  EXPECT_LE(lo, mc);
  EXPECT_LE(mc, up);
  EXPECT_LE(j["analytic_value"].get<double>(), mc);
}

TEST(Sweep, RegimeFlipsOnceAtBoundary) {
  auto o = opts();
  o.param = "mu";
  o.range = "0.1:1.5:15";
  const auto rows = csv_rows(run("sweep", load("bm_threshold.json").dump(), o).output);
  ASSERT_EQ(rows.size(), 1u + 16u);
  const auto& h = rows[0];
  const auto reg = column(h, "regime"), val = column(h, "value"), bnd = column(h, "boundary");
  int flips = 0;
  for (std::size_t k = 2; k < rows.size(); ++k) flips += rows[k][reg] != rows[k - 1][reg];
  EXPECT_EQ(flips, 1);
  for (const auto& row : rows)
    if (row[bnd] == "1") {
      EXPECT_NEAR(std::stod(row[val]), std::sqrt(0.2), 1e-14);
      EXPECT_EQ(row[reg], "chatter_to_zero");
    }
}

TEST(Sweep, SinglePointIsOneRow) {
  auto o = opts();
  o.param = "rho";
  o.range = "0.1:0.1:1";
  EXPECT_EQ(csv_rows(run("sweep", load("bm_threshold.json").dump(), o).output).size(), 2u);
}

TEST(Sweep, ThresholdContinuousInFineSweep) {
  auto o = opts();
  o.param = "dynamics[0].sigma";
  o.range = "0.5:1.5:201";
  const auto rows = csv_rows(run("sweep", load("bm_threshold.json").dump(), o).output);
  const auto xs = column(rows[0], "x_star");
  for (std::size_t k = 2; k < rows.size(); ++k) {
    const double a = std::stod(rows[k - 1][xs]), b = std::stod(rows[k][xs]);
    EXPECT_LT(std::abs(b - a), 0.05 * a) << "row " << k;
  }
}

TEST(Sweep, UnknownParameterIsConfigError) {
  auto o = opts();
  o.param = "gamma";
  o.range = "0:1:3";
  EXPECT_EQ(run("sweep", load("bm_threshold.json").dump(), o).exit_code, 1);
  o.param = "mu";
  o.range = "0:1";
  EXPECT_EQ(run("sweep", load("bm_threshold.json").dump(), o).exit_code, 1);
}

TEST(Binary, ExitCodes) {
  const std::string dir = HARVEST_SOURCE_DIR "/configs/";
  EXPECT_EQ(exit_status("solve --config " + dir + "bm2d.json"), 0);
  EXPECT_EQ(exit_status("solve --config /nonexistent.json"), 1);
  EXPECT_EQ(exit_status("solve"), 106);  // CLI11 reports a missing required option itself
}

TEST(Binary, WritesOutFile) {
  const std::string out = testing::TempDir() + "solve_out.json";
  ASSERT_EQ(exit_status("solve --no-meta --config " HARVEST_SOURCE_DIR "/configs/bm2d.json --out " + out), 0);
  EXPECT_EQ(json::parse(harvest_test::read_text(out))["value"].get<double>(), 6.0);
}
