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

// bench: config-driven Monte Carlo runs.
//
//   bench run --config F [--reps N] [--out DIR] [--jobs J]
//   bench validate --config F
//   bench report --in DIR
//
// Precedence for overlapping settings: command-line flags, then the
// BENCH_SEED environment variable (base seed only), then the config file.
// Exit codes: 0 ok, 1 config error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "boostiv/bench.hpp"

namespace {

boostiv::ExperimentConfig load_with_env(const std::string& path) {
  boostiv::ExperimentConfig cfg = boostiv::load_config(path);
  if (const char* env = std::getenv("BENCH_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s = env;
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      cfg.base_seed = boostiv::Seed{v};
    } catch (const std::exception&) {
      throw boostiv::ConfigError(std::string("BENCH_SEED: not a non-negative integer: ") + env);
    }
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo benchmark for boosted IV estimators"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_dir;
  int reps = 0, jobs = 1;

  auto* run = app.add_subcommand("run", "run an experiment and write results.csv and summary.json");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--reps", reps, "override n_reps")->check(CLI::PositiveNumber);
  run->add_option("--out", out_dir, "override the output directory");
  run->add_option("--jobs", jobs, "parallel replications")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults applied");
  validate->add_option("--config", config_path, "experiment config (JSON)")->required();

  auto* report = app.add_subcommand("report", "re-aggregate results.csv from a run directory");
  report->add_option("--in", in_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  boostiv::ExperimentConfig cfg;
  if (*run || *validate) {
    try {
      cfg = load_with_env(config_path);
      if (reps > 0) cfg.n_reps = reps;
      if (!out_dir.empty()) cfg.output = out_dir;
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 1;
    }
  }

  if (*validate) {
    std::cout << boostiv::config_to_json(cfg).dump(2) << '\n';
    return 0;
  }

  if (*run) {
    try {
      const auto result = boostiv::run_experiment(cfg, jobs);
      boostiv::write_report(result, cfg.output);
      for (const auto& a : boostiv::aggregate(result.rows))
        std::cerr << a.estimator << ": mean mse " << boostiv::format_double(a.mean_mse) << ", median "
                  << boostiv::format_double(a.median_mse) << ", failed " << a.n_failed << '\n';
      if (result.all_failed()) {
        std::cerr << "every replication failed\n";
        return 2;
      }
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }

  try {
    const std::string csv = in_dir + "/results.csv";
    std::ifstream in(csv);
    if (!in) throw boostiv::IoError("cannot read " + csv);
    const auto rows = boostiv::read_rows_csv(in);
    nlohmann::json echo = nullptr;
    std::ifstream summary(in_dir + "/summary.json");
    if (summary) echo = nlohmann::json::parse(summary).value("config", nlohmann::json(nullptr));
    std::cout << boostiv::summary_json(echo, rows).dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
