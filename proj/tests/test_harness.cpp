#include "mmfl/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

namespace mmfl {
namespace {

ResultRow row(int trial, const char* scheme, double e) {
  ResultRow r;
  r.trial = trial;
  r.seed = 100 + static_cast<std::uint64_t>(trial);
  r.scheme = scheme;
  r.M = 100;
  r.N = 3;
  r.K = 10;
  r.E_total = e;
  r.E_d = e / 2;
  r.sum_E_C = e / 4;
  r.sum_E_u = e / 4;
  r.status = "feasible";
  return r;
}

TEST(Sweep, Parse) {
  const auto m = parse_sweep("m=50:150:25");
  EXPECT_EQ(m.axis, SweepAxis::M);
  EXPECT_EQ(m.values, (std::vector<int>{50, 75, 100, 125, 150}));
  const auto k = parse_sweep("k=2:10:4");
  EXPECT_EQ(k.axis, SweepAxis::K);
  EXPECT_EQ(k.values, (std::vector<int>{2, 6, 10}));
  for (const char* bad : {"", "m=", "x=1:2:1", "m=5:1:1", "m=1:5:0", "m=1:5", "m=a:5:1", "m=1:5:1:2"})
    EXPECT_THROW(parse_sweep(bad), ConfigError) << bad;
}

TEST(Methods, Names) {
  for (Method m : {Method::OptAsync, Method::OptSync, Method::HeurAsync, Method::HeurSync})
    EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("opt"), ConfigError);
  EXPECT_EQ(scheme_of(Method::HeurSync), Scheme::Sync);
}

TEST(Spec, Validation) {
  ExperimentSpec s;
  s.trials = 0;
  EXPECT_THROW(validate(s), ConfigError);
  s.trials = 1;
  s.sweep = parse_sweep("m=20:40:10");  // M = 20 < K_total = 30
  EXPECT_THROW(validate(s), ConfigError);
  s.sweep = parse_sweep("k=2:10:2");
  EXPECT_NO_THROW(validate(s));
  EXPECT_EQ(sweep_configs(s).back().K_total(), 30);
  s.methods.clear();
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(Run, SingleRow) {
  ExperimentSpec s;
  s.trials = 1;
  s.methods = {Method::HeurAsync};
  const auto rows = run_rows(s);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].scheme, "heur_async");
  EXPECT_EQ(rows[0].seed, trial_seed(1, 0));
  EXPECT_EQ(rows[0].wall_time, 0.0);
  EXPECT_EQ(rows[0].E_total, rows[0].E_d + rows[0].sum_E_C + rows[0].sum_E_u);
}

TEST(Run, PairedSeedsAndOrder) {
  ExperimentSpec s;
  s.trials = 3;
  s.sweep = parse_sweep("m=60:100:40");
  s.methods = {Method::HeurSync, Method::HeurAsync};
  const auto rows = run_rows(s);
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0].M, 60);
  EXPECT_EQ(rows[11].M, 100);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    EXPECT_EQ(rows[i].scheme, "heur_sync");
    EXPECT_EQ(rows[i + 1].scheme, "heur_async");
    EXPECT_EQ(rows[i].seed, rows[i + 1].seed);
    EXPECT_EQ(rows[i].seed, rows[i + 6 * (i < 6 ? 1 : -1)].seed);
  }
}

TEST(Run, ReproducibleAcrossWorkerCounts) {
  ExperimentSpec s;
  s.trials = 4;
  s.methods = {Method::OptAsync, Method::HeurAsync};
  s.sca.restarts = 1;
  std::ostringstream a, b, c;
  s.workers = 1;
  write_csv(a, run_rows(s));
  s.workers = 4;
  write_csv(b, run_rows(s));
  write_csv(c, run_rows(s));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(b.str(), c.str());
}

TEST(Run, InfeasibleTrialsAreKept) {
  ExperimentSpec s;
  s.base.t_qos = 1.0;
  s.trials = 2;
  s.methods = {Method::OptSync, Method::HeurSync};
  const auto rows = run_rows(s);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].status, "infeasible_start");
  EXPECT_TRUE(std::isnan(rows[0].E_total));
  EXPECT_EQ(rows[1].status, "infeasible");
}

TEST(Csv, HeaderAndRoundTrip) {
  std::vector<ResultRow> rows{row(0, "opt_async", 1.0 / 3), row(1, "heur_async", 12.5)};
  rows[1].E_total = std::numeric_limits<double>::quiet_NaN();
  rows[1].status = "solver_failure";
  rows[0].wall_time = 0.25;
  std::ostringstream os;
  write_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "trial,seed,scheme,M,N,K,E_total,E_d,sum_E_C,sum_E_u,sca_iterations,status,wall_time");
  EXPECT_NE(os.str().find(",0.3333333333333333,"), std::string::npos);
  std::istringstream is(os.str());
  const auto back = read_csv(is);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].E_total, 1.0 / 3);
  EXPECT_EQ(back[0].wall_time, 0.25);
  EXPECT_TRUE(std::isnan(back[1].E_total));
  EXPECT_EQ(back[1].status, "solver_failure");
  EXPECT_EQ(back[1].seed, 101u);
}

TEST(Csv, RejectsMalformed) {
  std::istringstream wrong_header("a,b,c\n");
  EXPECT_THROW(read_csv(wrong_header), std::runtime_error);
  std::istringstream short_row(std::string(kCsvHeader) + "\n1,2,opt_async\n");
  EXPECT_THROW(read_csv(short_row), std::runtime_error);
}

TEST(Csv, UnwritablePath) {
  ExperimentSpec s;
  s.trials = 1;
  s.methods = {Method::HeurAsync};
  EXPECT_THROW(run_experiment(s, "/nonexistent-dir/out.csv"), std::runtime_error);
  const auto path = std::filesystem::temp_directory_path() / "mmfl_harness_test.csv";
  EXPECT_EQ(run_experiment(s, path.string()).size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(path));
  std::filesystem::remove(path);
}

TEST(Summary, IdenticalColumnsGiveZeroReduction) {
  std::vector<ResultRow> rows;
  for (int t = 0; t < 4; ++t) {
    rows.push_back(row(t, "opt_async", 5.0 + t));
    rows.push_back(row(t, "heur_async", 5.0 + t));
  }
  const auto s = summarize(rows);
  const auto* r = s.find_reduction("heur_async", "opt_async", 100, 3, 10);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->percent, 0.0);
  EXPECT_EQ(r->wins, 4u);
}

TEST(Summary, HalfEnergyIsFiftyPercent) {
  std::vector<ResultRow> rows;
  for (int t = 0; t < 5; ++t) {
    rows.push_back(row(t, "opt_sync", 1.0 + t));
    rows.push_back(row(t, "heur_sync", 2.0 + 2 * t));
  }
  const auto s = summarize(rows);
  EXPECT_NEAR(s.find_reduction("heur_sync", "opt_sync", 100, 3, 10)->percent, 50.0, 1e-12);
  const auto* g = s.find("opt_sync", 100, 3, 10);
  ASSERT_NE(g, nullptr);
  EXPECT_DOUBLE_EQ(g->mean, 3.0);
  EXPECT_NEAR(g->std_error, std::sqrt(2.5 / 5), 1e-12);
}

TEST(Summary, UnpairedAndFailedTrialsAreSkipped) {
  std::vector<ResultRow> rows{row(0, "opt_async", 1.0), row(0, "heur_async", 4.0), row(1, "opt_async", 2.0),
                              row(2, "heur_async", 9.0), row(3, "opt_async", 1.0), row(3, "heur_async", 2.0)};
  rows[4].E_total = std::numeric_limits<double>::quiet_NaN();
  const auto s = summarize(rows);
  const auto* r = s.find_reduction("heur_async", "opt_async", 100, 3, 10);
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->pairs, 1u);
  EXPECT_NEAR(r->percent, 75.0, 1e-12);
  EXPECT_EQ(s.find("opt_async", 100, 3, 10)->valid, 2u);
  EXPECT_EQ(s.find("opt_async", 100, 3, 10)->rows, 3u);
  std::ostringstream os;
  write_summary(os, s);
  EXPECT_NE(os.str().find("heur_async,opt_async,100,3,10,1,1,4,1,75"), std::string::npos);
}

TEST(Trend, MoreAntennasLessEnergy) {
  ExperimentSpec s;
  s.sweep = parse_sweep("m=50:150:50");
  s.trials = 20;
  s.methods = {Method::OptAsync};
  s.sca.restarts = 1;
  const auto sum = summarize(run_rows(s));
  const double e50 = sum.find("opt_async", 50, 3, 10)->mean;
  const double e100 = sum.find("opt_async", 100, 3, 10)->mean;
  const double e150 = sum.find("opt_async", 150, 3, 10)->mean;
  EXPECT_GT(e50, e100);
  EXPECT_GT(e100, e150);
}

}  // namespace
}  // namespace mmfl
