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

// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "boostiv/bench.hpp"

namespace {

using boostiv::Aggregate;
using boostiv::ExperimentConfig;

namespace fs = std::filesystem;

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentConfig config(const std::string& name) { return boostiv::load_config(std::string(CONFIG_DIR) + "/" + name); }

std::map<std::string, Aggregate> run(const ExperimentConfig& cfg) {
  std::map<std::string, Aggregate> out;
  for (const auto& a : boostiv::aggregate(boostiv::run_experiment(cfg, jobs()).rows)) out[a.estimator] = a;
  return out;
}

// Mean MSE, or +inf when any replication failed.
double mean_mse(const std::map<std::string, Aggregate>& agg, const std::string& name) {
  const auto it = agg.find(name);
  if (it == agg.end() || it->second.n_failed > 0 || it->second.n_ok == 0) return HUGE_VAL;
  return it->second.mean_mse;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

bool report(int id, bool ok, const std::string& detail) {
  std::printf("CRITERION %d %s: %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return ok;
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Reference {
  const char* design;
  double npiv;
};

constexpr Reference kNpivReference[] = {{"abs", 0.1916}, {"log", 0.6936}, {"sin", 0.1837}, {"step", 0.1267}};

bool univariate(std::map<std::string, std::map<std::string, Aggregate>>& results) {
  bool ok = true;
  std::string detail;
  for (const auto& ref : kNpivReference) {
    auto& agg = results[ref.design] = run(config(std::string("univariate_") + ref.design + ".json"));
    const double post = mean_mse(agg, "post-boostiv");
    const double npiv = mean_mse(agg, "npiv");
    const bool pass = post < npiv;
    ok = ok && pass;
    detail += std::string(ref.design) + " post " + fmt(post) + " vs npiv " + fmt(npiv) + (pass ? "" : " (!)") + "; ";
  }
  return report(1, ok, detail);
}

bool magnitudes(std::map<std::string, std::map<std::string, Aggregate>>& results) {
  bool ok = true;
  std::string detail;
  const std::pair<const char*, double> boost_ref[] = {{"abs", 0.0348}, {"sin", 0.0292}};
  for (const auto& [design, ref] : boost_ref) {
    const double v = mean_mse(results[design], "boostiv");
    const bool pass = v >= ref / 3.0 && v <= ref * 3.0;
    ok = ok && pass;
    detail += std::string("boostiv ") + design + " " + fmt(v) + " in [" + fmt(ref / 3) + ", " + fmt(ref * 3) + "]" +
              (pass ? "" : " (!)") + "; ";
  }
  for (const auto& ref : kNpivReference) {
    const double v = mean_mse(results[ref.design], "npiv");
    const bool pass = v >= 0.5 * ref.npiv && v <= 1.5 * ref.npiv;
    ok = ok && pass;
    detail += std::string("npiv ") + ref.design + " " + fmt(v) + " in [" + fmt(0.5 * ref.npiv) + ", " +
              fmt(1.5 * ref.npiv) + "]" + (pass ? "" : " (!)") + "; ";
  }
  return report(2, ok, detail);
}

bool multivariate() {
  const auto agg = run(config("multivariate_design1_linear.json"));
  const double boost = mean_mse(agg, "boostiv");
  const double npiv = mean_mse(agg, "npiv");
  const bool bound = boost <= 0.15;
  const bool blowup = npiv > 10.0 * boost;
  return report(3, bound && blowup,
                "boostiv " + fmt(boost) + " <= 0.15" + (bound ? "" : " (!)") + "; npiv " + fmt(npiv) + " > 10 x " +
                    fmt(boost) + " (ratio " + fmt(npiv / boost) + ")" + (blowup ? "" : " (!)"));
}

bool properties() {
  struct Check {
    const char* what;
    const char* exe;
    const char* filter;
  };
  const Check checks[] = {
      {"projection", CORE_TEST_EXE, "Project.IdempotentAndContractingOnRandomInstances"},
      {"stump oracle", LEARNERS_TEST_EXE, "FitStumpProjected.*ExhaustiveOracle*"},
      {"zero-stump dominance", BOOSTING_TEST_EXE, "Boosting.ProjectedLossNeverExceedsZeroStump"},
      {"fold average", BOOSTING_TEST_EXE, "FitCrossfit.PredictIsFoldAverage"},
      {"prefix path", SELECTION_TEST_EXE, "PrefixProperty.*"},
      {"post prefix path", POSTPROCESS_TEST_EXE, "FitPost.PathMatchesFreshFit"},
      {"early stopping", SELECTION_TEST_EXE, "EarlyStopping.*"},
      {"post LS dominance", POSTPROCESS_TEST_EXE, "FitPost.InFoldLeastSquaresOptimality"},
      {"2SLS oracle", BASELINES_TEST_EXE, "NpivFit.ClosedFormTwoStageLeastSquares"},
  };
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string failed;
  for (const auto& c : checks) {
    if (shell(std::string("\"") + c.exe + "\" --gtest_filter='" + c.filter + "'") != 0) {
      ok = false;
      failed += std::string(" ") + c.what + ";";
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool fast = secs < 60.0;
  return report(4, ok && fast,
                std::to_string(std::size(checks)) + " property checks in " + fmt(secs) + " s" +
                    (ok ? "" : ", failed:" + failed) + (fast ? "" : " (over 60 s)"));
}

bool consistency() {
  ExperimentConfig cfg = config("univariate_abs.json");
  cfg.npiv.enabled = cfg.post.enabled = false;
  cfg.n_reps = 10;
  cfg.n_val = 0;
  const auto median_at = [&](boostiv::Index n) {
    cfg.n_train = n;
    const auto agg = run(cfg);
    const auto& a = agg.at("boostiv");
    return a.n_failed > 0 ? HUGE_VAL : a.median_mse;
  };
  const double small = median_at(250);
  const double large = median_at(2000);
  return report(5, large < small, "median boostiv abs n=2000 " + fmt(large) + " < n=250 " + fmt(small));
}

bool reproducibility() {
  const fs::path root = fs::temp_directory_path() / "boostiv_acceptance_repro";
  fs::remove_all(root);
  const std::string cfg = std::string(CONFIG_DIR) + "/univariate_sin.json";
  bool ok = true;
  std::string detail;
  // Same --out for every run (the summary echoes it); snapshot after each.
  std::map<std::string, std::map<std::string, std::string>> snap;
  const std::pair<const char*, const char*> runs[] = {{"a", "1"}, {"b", "1"}, {"c", "2"}, {"d", "4"}};
  for (const auto& [tag, j] : runs) {
    const std::string cmd = std::string("\"") + BENCH_EXE + "\" run --config \"" + cfg + "\" --reps 4 --jobs " + j +
                            " --out \"" + (root / "out").string() + "\"";
    if (shell(cmd) != 0) {
      ok = false;
      detail += std::string("run ") + tag + " failed; ";
    }
    for (const char* f : {"results.csv", "summary.json"}) snap[tag][f] = slurp(root / "out" / f);
    fs::remove_all(root / "out");
  }
  for (const char* f : {"results.csv", "summary.json"})
    for (const char* tag : {"b", "c", "d"})
      if (snap["a"][f].empty() || snap[tag][f] != snap["a"][f]) {
        ok = false;
        detail += std::string(f) + " differs in run " + tag + "; ";
      }
  fs::remove_all(root);
  return report(6, ok, ok ? "results.csv and summary.json byte-identical across reruns and --jobs 1, 2, 4" : detail);
}

}  // namespace

int main() {
  std::map<std::string, std::map<std::string, Aggregate>> results;
  bool ok = true;
  try {
    ok &= univariate(results);
    ok &= magnitudes(results);
    ok &= multivariate();
    ok &= properties();
    ok &= consistency();
    ok &= reproducibility();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  return ok ? 0 : 1;
}
