#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "cqed/cli.hpp"
#include "cqed/scenarios.hpp"

using namespace cqed;

namespace {

const std::filesystem::path kSource = CQED_SOURCE_DIR;

std::map<std::string, std::string> as_map(const ParamSet& ps) {
  std::map<std::string, std::string> m;
  for (const ParamEntry& e : ps.entries()) m[e.key] = e.value;
  return m;
}

// Rows "| `key` | value | ..." under "### <scenario>" in the README.
std::map<std::string, std::string> readme_table(const std::string& scenario) {
  std::ifstream in(kSource / "README.md");
  std::map<std::string, std::string> rows;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.rfind("### ", 0) == 0) {
      inside = trim(line.substr(4)) == "`" + scenario + "`";
      continue;
    }
    if (!inside || line.rfind("| `", 0) != 0) continue;
    const auto cells = split(line, '|');
    if (cells.size() < 3) continue;
    std::string key = trim(cells[1]);
    key = key.substr(1, key.size() - 2);
    rows[key] = trim(cells[2]);
  }
  return rows;
}

}  // namespace

TEST(ParamSet, SetAndErrors) {
  ParamSet ps = scenario_defaults("leakage");
  ps.set("system.g_p_ghz", "0");
  EXPECT_EQ(ps.number("system.g_p_ghz"), 0.0);
  EXPECT_THROW(ps.set("system.g_p_gz", "0"), ConfigError);
  EXPECT_THROW(ps.set("system.f_r_ghz", "fast"), ConfigError);
  EXPECT_THROW(ps.set("leakage.alphas_ghz", "0.1,x"), ConfigError);
  ps.set("leakage.alphas_ghz", "0.15, 0.25");
  EXPECT_EQ(ps.list("leakage.alphas_ghz"), (std::vector<double>{0.15, 0.25}));
  EXPECT_THROW(ps.number("nope"), ConfigError);
  EXPECT_THROW(ps.integer("system.f_r_ghz"), ConfigError);
}

TEST(Scenarios, UnknownNameRejected) {
  EXPECT_THROW(scenario_defaults("fig9"), ConfigError);
  EXPECT_THROW(run_scenario("fig9", scenario_defaults("fig2a"), {}), ConfigError);
  EXPECT_EQ(scenario_names().size(), 8u);
}

TEST(Scenarios, DefaultsMatchShippedConfigs) {
  for (const std::string& name : scenario_names()) {
    const std::filesystem::path path = kSource / "configs" / (name + ".cfg");
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    std::map<std::string, std::string> file;
    for (const auto& [k, v] : read_config_file(path)) file[k] = v;
    EXPECT_EQ(file, as_map(scenario_defaults(name))) << name;
  }
}

TEST(Scenarios, DefaultsMatchReadmeTables) {
  for (const std::string& name : scenario_names()) {
    const auto table = readme_table(name);
    const auto defaults = as_map(scenario_defaults(name));
    ASSERT_EQ(table.size(), defaults.size()) << name;
    for (const auto& [key, value] : defaults) {
      ASSERT_TRUE(table.count(key)) << name << " " << key;
      double a = 0.0, b = 0.0;
      if (parse_number(value, a) && parse_number(table.at(key), b)) {
        EXPECT_EQ(a, b) << name << " " << key;
      } else {
        EXPECT_EQ(table.at(key), value) << name << " " << key;
      }
    }
  }
}

TEST(Scenarios, DeviceDefaults) {
  const SystemParams p = system_from(scenario_defaults("fig2a"));
  EXPECT_EQ(p.f_1, 3.0);
  EXPECT_EQ(p.f_2, 3.0);
  EXPECT_EQ(p.f_r, 6.0);
  EXPECT_EQ(p.g_1, 0.08);
  EXPECT_EQ(p.alpha_1, 0.3);
  EXPECT_EQ(p.g_p, 0.004);
  const SystemParams q = system_from(scenario_defaults("iswap-tomo"));
  EXPECT_EQ(q.f_r, 5.19);
  EXPECT_EQ(q.f_1, 6.617);
}

TEST(Scenarios, PaperScale) {
  ParamSet rb = scenario_defaults("rb");
  apply_paper_scale(rb);
  EXPECT_EQ(rb.integer("rb.n_max"), 100);
  EXPECT_EQ(rb.integer("rb.realizations"), 1000);
}

TEST(Fig2a, SwapTimesAndOrdering) {
  const Fig2aResult r = run_fig2a(scenario_defaults("fig2a"));
  for (const SwapModelRun* m : {&r.g0, &r.gp}) {
    EXPECT_NEAR(m->t_first_min, m->tau_pred, 0.02 * m->tau_pred) << m->label;
    EXPECT_NEAR(m->series.channel("P_atom1").front(), 1.0, 1e-12);
  }
  EXPECT_GT(r.gp.tau_pred, r.g0.tau_pred);
  const ScenarioOutput out = fig2a_output(scenario_defaults("fig2a"), r);
  ASSERT_EQ(out.line_plots.size(), 1u);
  EXPECT_EQ(out.line_plots[0].vlines.size(), 2u);
  EXPECT_EQ(out.line_plots[0].series.channels.size(), 2u);
}

TEST(Selectivity, Algebra) {
  EXPECT_EQ(selectivity(0.3, 0.3), 0.0);
  EXPECT_NEAR(selectivity(0.9, 0.1), 0.8, 1e-15);
  EXPECT_EQ(selectivity(0.0, 0.5), -1.0);
  EXPECT_THROW(selectivity(0.0, 0.0), DomainError);
}

TEST(Selectivity, ReducedSweep) {
  ParamSet ps = scenario_defaults("selectivity");
  ps.set("selectivity.kappa_points", "3");
  const auto rs = run_selectivity(ps, {});
  ASSERT_EQ(rs.size(), 9u);
  for (const SelectivityResult& r : rs) {
    const double s = (r.P_add_max - r.P_spe_max) / (r.P_add_max + r.P_spe_max);
    EXPECT_NEAR(r.S, s, 1e-12);
    EXPECT_GE(r.S, -1.0);
    EXPECT_LE(r.S, 1.0);
    if (r.configuration != "idle" && std::abs(r.kappa) == 25.0) {
      EXPECT_GT(r.S, 0.9) << r.configuration;
    }
    if (r.configuration == "idle" && r.kappa == 0.0) {
      EXPECT_LT(std::abs(r.S), 0.1);
    }
  }
  const ScenarioOutput out = selectivity_output(ps, rs);
  EXPECT_EQ(out.tables.size(), 3u);
}

TEST(Protocol, StagesAtDefaults) {
  const ProtocolResult r = run_protocol(scenario_defaults("protocol"));
  EXPECT_GT(r.prep_final_population, 0.98);
  EXPECT_LT(r.wait_drift, 1e-2);
  EXPECT_LT(r.final_max_deviation, 0.05);
  EXPECT_NEAR(r.prep.f_2 - r.prep.f_1, -0.1, 1e-12);
  EXPECT_NEAR(r.prep.f_r, idle_frequency_general(r.prep), 1e-12);
  for (const char* c : {"P_10_joint", "P_01_joint", "analytic_P_10_cos4", "analytic_P_01_sin4"}) {
    EXPECT_TRUE(r.series.has(c)) << c;
  }
}

TEST(IswapTomo, DerivedTimesAndFidelity) {
  const TomoResult r = run_iswap_tomo(scenario_defaults("iswap-tomo"));
  EXPECT_NEAR(r.g0.gate.tau, 55.74, 0.005 * 55.74);
  EXPECT_NEAR(r.gp.gate.tau, 29.51, 0.005 * 29.51);
  EXPECT_GE(r.g0.fidelity, 0.99);
  EXPECT_GE(r.gp.fidelity, 0.99);
  for (int m = 0; m < 16; ++m) {
    const bool support = m == 0 || m == 5 || m == 10 || m == 15;
    if (!support) {
      EXPECT_LT(std::abs(r.ideal.chi(m, m)), 1e-12);
    }
  }
}

TEST(RBScenario, SmallRunDeterministic) {
  ParamSet ps = scenario_defaults("rb");
  ps.set("rb.n_max", "6");
  ps.set("rb.realizations", "10");
  const ScenarioOutput a = run_scenario("rb", ps, {});
  const ScenarioOutput b = run_scenario("rb", ps, {});
  EXPECT_EQ(a.results.dump(), b.results.dump());
  const TimeSeries& ts = a.tables.at(0).second;
  EXPECT_EQ(ts.channel("F_g0").front(), 1.0);
  EXPECT_EQ(ts.channel("F_gp").front(), 1.0);
  EXPECT_TRUE(a.results["g0"].contains("f_bar_uncertainty"));
  RunContext other;
  other.seed = 7;
  EXPECT_NE(run_scenario("rb", ps, other).results.dump(), a.results.dump());
}

TEST(LeakageScenario, SmallRun) {
  ParamSet ps = scenario_defaults("leakage");
  ps.set("leakage.n_max", "4");
  ps.set("leakage.realizations", "10");
  const LeakageResult r = run_leakage(ps, {});
  ASSERT_EQ(r.runs.size(), 3u);
  for (const RBResult& run : r.runs) {
    EXPECT_EQ(run.mean_leakage.front(), 0.0);
    for (double v : run.mean_leakage) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  ps.set("system.dim_atom", "3");
  EXPECT_THROW(run_leakage(ps, {}), ConfigError);
}

TEST(Chevron, ReducedMapStructure) {
  ParamSet ps = scenario_defaults("chevron");
  ps.set("chevron.f_r_points", "5");
  ps.set("chevron.time_points", "21");
  const ChevronScenarioResult r = run_chevron(ps, {});
  EXPECT_EQ(r.maps.p_atom1.axis1.size(), 5u);
  EXPECT_EQ(r.maps.p_atom1.values.size(), 5u * 21u);
  const ScenarioOutput out = chevron_output(ps, r);
  ASSERT_EQ(out.heatmaps.size(), 1u);
  ASSERT_TRUE(out.heatmaps[0].hline.has_value());
  EXPECT_EQ(out.grids.size(), 2u);
}

TEST(Fig2b, ReducedSweep) {
  ParamSet ps = scenario_defaults("fig2b");
  ps.set("fig2b.kappa_points", "3");
  const Fig2bResult r = run_fig2b(ps, {});
  ASSERT_EQ(r.points.size(), 3u);
  EXPECT_LT(r.points.front().p1_min, 0.05);
  EXPECT_GT(r.points.back().p1_min, 0.9);
}

TEST(Scenarios, RerunIsIdentical) {
  const ParamSet ps = scenario_defaults("iswap-tomo");
  EXPECT_EQ(run_scenario("iswap-tomo", ps, {}).results.dump(), run_scenario("iswap-tomo", ps, {}).results.dump());
}
