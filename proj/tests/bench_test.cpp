/*
 * Copyright 2026 The boostiv Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "boostiv/bench.hpp"

namespace boostiv {
namespace {

namespace fs = std::filesystem;

const char* kSmall = R"({
  "design": {"type": "univariate", "function": "sin"},
  "estimators": {
    "npiv": {},
    "boostiv": {"M": 40},
    "post-boostiv": {"grid": {"points": [10, 20, 30]}}
  },
  "n_train": 200, "n_val": 100, "n_test": 100, "n_reps": 3, "base_seed": 9
})";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("boostiv_bench_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(BenchConfig, MinimalConfigGetsDefaults) {
  const ExperimentConfig c = parse_config(R"({"design": {"type": "univariate"}})");
  EXPECT_EQ(c.design, DesignKind::kUnivariate);
  EXPECT_EQ(c.univariate.g, StructuralFunction::kAbs);
  EXPECT_EQ(c.n_train, 1000);
  EXPECT_EQ(c.n_reps, 20);
  EXPECT_EQ(c.estimators(), (std::vector<std::string>{"npiv", "boostiv", "post-boostiv"}));
  EXPECT_EQ(c.post.grid.points.front(), 50);
  EXPECT_EQ(c.post.grid.points.back(), 500);
}

TEST(BenchConfig, UnknownKeysAreNamed) {
  EXPECT_NE(config_error(R"({"design": {"type": "univariate"},
      "estimators": {"boostiv": {"momentum": 0.9}}})").find("momentum"), std::string::npos);
  EXPECT_NE(config_error(R"({"design": {"type": "univariate"}, "nreps": 3})").find("nreps"), std::string::npos);
  EXPECT_NE(config_error(R"({"design": {"type": "univariate", "dz": 3}})").find("dz"), std::string::npos);
}

TEST(BenchConfig, ConstraintViolationsNameTheField) {
  EXPECT_NE(config_error(R"({"design": {"type": "multivariate", "rho": 1.5}})").find("design.rho"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"design": {"type": "univariate"}, "n_reps": 0})").find("n_reps"), std::string::npos);
  EXPECT_NE(config_error(R"({"design": {"type": "univariate"}, "n_reps": "3"})").find("n_reps"), std::string::npos);
  EXPECT_NE(config_error(R"({"design": {"type": "univariate"},
      "estimators": {"boostiv": {"nu": -1}}})").find("nu"), std::string::npos);
  EXPECT_NE(config_error("{not json").find("JSON"), std::string::npos);
  EXPECT_NE(config_error("{}").find("design"), std::string::npos);
}

TEST(BenchConfig, EchoParsesBackToTheSameConfig) {
  const ExperimentConfig c = parse_config(kSmall);
  const nlohmann::json echo = config_to_json(c);
  EXPECT_EQ(config_to_json(parse_config(echo.dump())), echo);
}

TEST(BenchReport, EmptyRows) {
  std::stringstream csv;
  write_rows_csv(csv, {});
  EXPECT_EQ(csv.str(), std::string(kCsvHeader) + "\n");
  const nlohmann::json s = summary_json(nullptr, {});
  EXPECT_EQ(s["rows"], 0);
  EXPECT_TRUE(s["aggregates"].empty());
}

TEST(BenchReport, AggregatesIgnoreFailedRows) {
  std::vector<ReportRow> rows{{"a", 0, 1, 1.0, 0.1, 5}, {"a", 1, 2, 3.0, 0.3, 7}, {"a", 2, 3, 0, 0, 0, 0, "failed:x"},
                              {"b", 0, 1, 2.0, 0.0, 0}};
  const auto agg = aggregate(rows);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].n_ok, 2);
  EXPECT_EQ(agg[0].n_failed, 1);
  EXPECT_DOUBLE_EQ(agg[0].mean_mse, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].median_mse, 2.0);
  EXPECT_DOUBLE_EQ(agg[0].std_mse, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(agg[0].mean_m_star, 6.0);
  EXPECT_EQ(agg[1].estimator, "b");
}

TEST(BenchReport, CsvRoundTripReproducesAggregates) {
  const ExperimentReport r = run_experiment(parse_config(kSmall));
  std::stringstream csv;
  write_rows_csv(csv, r.rows);
  const auto back = read_rows_csv(csv);
  EXPECT_EQ(summary_json(nullptr, back).dump(), summary_json(nullptr, r.rows).dump());
}

TEST(BenchRun, EstimatorsShareTheReplicationSeed) {
  const ExperimentConfig c = parse_config(kSmall);
  const ExperimentReport r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 9u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.seed, replication_seed(c.base_seed, row.rep).value);
    EXPECT_TRUE(row.ok()) << row.status;
    EXPECT_EQ(row.wall_ms, 0.0);
  }
}

TEST(BenchRun, OutputIsIndependentOfJobsAndReruns) {
  ExperimentConfig c = parse_config(kSmall);
  const fs::path a = scratch_dir("a"), b = scratch_dir("b"), j = scratch_dir("j");
  write_report(run_experiment(c, 1), a.string());
  write_report(run_experiment(c, 1), b.string());
  write_report(run_experiment(c, 3), j.string());
  for (const char* f : {"results.csv", "summary.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(j / f)) << f;
  }
  for (const auto& p : {a, b, j}) fs::remove_all(p);
}

#ifdef BENCH_EXE
int run_bench(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" BENCH_EXE "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(BenchCli, ExitCodesAndSeedOverride) {
  const fs::path dir = scratch_dir("cli");
  fs::create_directories(dir);
  const fs::path cfg = dir / "c.json";
  std::ofstream(cfg) << kSmall;
  std::ofstream(dir / "bad.json") << R"({"design": {"type": "univariate"}, "momentum": 1})";

  EXPECT_EQ(run_bench("validate --config " + cfg.string()), 0);
  EXPECT_EQ(run_bench("validate --config " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(run_bench("validate --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_bench("frobnicate"), 1);
  EXPECT_EQ(run_bench("report --in " + (dir / "nowhere").string()), 2);

  const std::string base = "run --config " + cfg.string() + " --reps 1 --out ";
  ASSERT_EQ(run_bench(base + (dir / "s9").string()), 0);
  ASSERT_EQ(run_bench(base + (dir / "env").string(), "BENCH_SEED=123"), 0);
  ASSERT_EQ(run_bench(base + (dir / "env9").string(), "BENCH_SEED=9"), 0);
  EXPECT_EQ(run_bench("run --config " + cfg.string(), "BENCH_SEED=abc"), 1);
  const std::string s9 = read_file(dir / "s9" / "results.csv");
  EXPECT_NE(s9, read_file(dir / "env" / "results.csv"));
  EXPECT_EQ(s9, read_file(dir / "env9" / "results.csv"));
  EXPECT_NE(read_file(dir / "env" / "summary.json").find("\"base_seed\": 123"), std::string::npos);
  EXPECT_EQ(run_bench("report --in " + (dir / "s9").string()), 0);
  fs::remove_all(dir);
}
#endif

}  // namespace
}  // namespace boostiv
