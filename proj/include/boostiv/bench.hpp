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

#pragma once

// Monte Carlo harness: config parsing, the replication loop and reports.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "boostiv/baselines.hpp"
#include "boostiv/boosting.hpp"
#include "boostiv/core.hpp"
#include "boostiv/dgp.hpp"
#include "boostiv/postprocess.hpp"
#include "boostiv/selection.hpp"
#include "boostiv/serialization.hpp"

namespace boostiv {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DesignKind { kUnivariate, kMultivariate };

struct NpivEstimator {
  bool enabled = true;
  int degree = 3;
  /// -1: degree + 1 when d_z > d_x, else degree.
  int iv_degree = -1;
  int interaction = 0;
};

struct BoostEstimator {
  bool enabled = true;
  BoostConfig cfg;
  bool tune = false;
  TuningGrid grid{{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000}, std::nullopt};
};

struct PostEstimator {
  bool enabled = true;
  BoostConfig cfg;
  int L = 2;
  TuningGrid grid = TuningGrid::linear(50, 500);
};

struct ExperimentConfig {
  DesignKind design = DesignKind::kUnivariate;
  UnivariateSpec univariate;
  MultivariateSpec multivariate;
  NpivEstimator npiv;
  BoostEstimator boostiv;
  PostEstimator post;
  Index n_train = 1000;
  Index n_val = 500;
  Index n_test = 1000;
  int n_reps = 20;
  Seed base_seed{1};
  std::string output = "bench_out";
  /// Off by default so reports stay byte-identical across runs.
  bool timing = false;

  std::vector<std::string> estimators() const {
    std::vector<std::string> out;
    if (npiv.enabled) out.emplace_back("npiv");
    if (boostiv.enabled) out.emplace_back("boostiv");
    if (post.enabled) out.emplace_back("post-boostiv");
    return out;
  }
};

namespace bench_detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::vector<std::string> unknown;
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) unknown.push_back(it.key());
  if (unknown.empty()) return;
  std::string msg = where + ": unknown key" + (unknown.size() > 1 ? "s" : "") + " ";
  for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", \"" : "\"") + unknown[i] + "\"";
  throw ConfigError(msg);
}

inline std::string field(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

template <class T>
T get(const json& obj, const std::string& where, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field(where, key) + ": expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field(where, key) + ": expected an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field(where, key) + ": expected a number");
  } else {
    if (!v.is_string()) throw ConfigError(field(where, key) + ": expected a string");
  }
  return v.get<T>();
}

inline void constraint(bool ok, const std::string& name, const std::string& rule) {
  if (!ok) throw ConfigError(name + ": constraint violated: " + rule);
}

inline TuningGrid parse_grid(const json& obj, const std::string& where, TuningGrid fallback) {
  check_keys(obj, where, {"points", "step", "max", "epsilon"});
  TuningGrid g;
  if (obj.contains("points")) {
    constraint(!obj.contains("step") && !obj.contains("max"), where, "give either points or step/max");
    const json& pts = obj.at("points");
    if (!pts.is_array()) throw ConfigError(field(where, "points") + ": expected an array");
    for (const auto& p : pts) {
      if (!p.is_number_integer()) throw ConfigError(field(where, "points") + ": expected integers");
      g.points.push_back(p.get<int>());
    }
  } else if (obj.contains("step") || obj.contains("max")) {
    const int step = get<int>(obj, where, "step", fallback.points.front());
    const int max = get<int>(obj, where, "max", fallback.max());
    constraint(step >= 1 && max >= step, where, "1 <= step <= max");
    g = TuningGrid::linear(step, max);
  } else {
    g = fallback;
  }
  if (obj.contains("epsilon")) g.epsilon = get<double>(obj, where, "epsilon", 0.0);
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return g;
}

inline InstrumentLearnerSpec parse_instrument(const json& obj, const std::string& where) {
  check_keys(obj, where, {"mode", "target", "degree", "interaction", "n_rounds", "learning_rate", "expansion"});
  InstrumentLearnerSpec s;
  const std::string mode = get<std::string>(obj, where, "mode", to_string(s.mode));
  if (mode == "linear-sieve") s.mode = InstrumentMode::kLinearSieve;
  else if (mode == "boosted-stumps") s.mode = InstrumentMode::kBoostedStumps;
  else throw ConfigError(field(where, "mode") + ": expected linear-sieve or boosted-stumps");
  const std::string target = get<std::string>(
      obj, where, "target", s.mode == InstrumentMode::kLinearSieve ? "sieve" : "reduced-form");
  if (target == "sieve") s.target = InstrumentTarget::kSieve;
  else if (target == "reduced-form") s.target = InstrumentTarget::kReducedForm;
  else if (target == "previous-basis") s.target = InstrumentTarget::kPreviousBasis;
  else throw ConfigError(field(where, "target") + ": expected sieve, reduced-form or previous-basis");
  s.degree = get<int>(obj, where, "degree", s.degree);
  s.interaction = get<int>(obj, where, "interaction", s.interaction);
  s.n_rounds = get<int>(obj, where, "n_rounds", s.n_rounds);
  s.learning_rate = get<double>(obj, where, "learning_rate", s.learning_rate);
  s.expansion = get<int>(obj, where, "expansion", s.expansion);
  constraint(s.degree >= 0, field(where, "degree"), ">= 0 (0 = automatic)");
  constraint(s.interaction >= 0, field(where, "interaction"), ">= 0");
  constraint(s.n_rounds >= 1, field(where, "n_rounds"), ">= 1");
  constraint(s.learning_rate > 0.0 && s.learning_rate <= 1.0, field(where, "learning_rate"), "in (0, 1]");
  constraint(s.expansion >= 1, field(where, "expansion"), ">= 1");
  constraint(!(s.target == InstrumentTarget::kSieve && s.mode != InstrumentMode::kLinearSieve),
             field(where, "target"), "sieve requires mode linear-sieve");
  return s;
}

// Keys shared by the two boosting estimators.
inline const std::set<std::string>& boost_keys() {
  static const std::set<std::string> keys{"nu", "K", "instrument", "optimal_instruments", "leaf_cap",
                                          "max_thresholds", "grid"};
  return keys;
}

inline void parse_boost_common(const json& obj, const std::string& where, BoostConfig& c) {
  c.nu = get<double>(obj, where, "nu", c.nu);
  c.K = get<int>(obj, where, "K", c.K);
  c.optimal_instruments = get<bool>(obj, where, "optimal_instruments", c.optimal_instruments);
  c.leaf_cap = get<double>(obj, where, "leaf_cap", c.leaf_cap);
  c.max_thresholds = get<int>(obj, where, "max_thresholds", c.max_thresholds);
  if (obj.contains("instrument")) c.instrument = parse_instrument(obj.at("instrument"), field(where, "instrument"));
  constraint(c.nu > 0.0 && c.nu <= 1.0, field(where, "nu"), "in (0, 1]");
  constraint(c.K >= 2, field(where, "K"), ">= 2");
  constraint(c.leaf_cap >= 0.0, field(where, "leaf_cap"), ">= 0");
  constraint(c.max_thresholds >= 1, field(where, "max_thresholds"), ">= 1");
}

inline json grid_to_json(const TuningGrid& g) {
  json j;
  j["points"] = g.points;
  if (g.epsilon) j["epsilon"] = *g.epsilon;
  return j;
}

inline json instrument_to_json(const InstrumentLearnerSpec& s) {
  return json{{"mode", to_string(s.mode)},     {"target", to_string(s.target)},
              {"degree", s.degree},            {"interaction", s.interaction},
              {"n_rounds", s.n_rounds},        {"learning_rate", s.learning_rate},
              {"expansion", s.expansion}};
}

inline json boost_common_to_json(const BoostConfig& c) {
  return json{{"nu", c.nu},
              {"K", c.K},
              {"instrument", instrument_to_json(c.instrument)},
              {"optimal_instruments", c.optimal_instruments},
              {"leaf_cap", c.leaf_cap},
              {"max_thresholds", c.max_thresholds}};
}

}  // namespace bench_detail

/// Parses and validates a JSON experiment config, applying defaults.
inline ExperimentConfig parse_config(const std::string& text) {
  using namespace bench_detail;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"design", "estimators", "n_train", "n_val", "n_test", "n_reps", "base_seed",
                              "output", "timing"});
  ExperimentConfig cfg;
  if (!root.contains("design")) throw ConfigError("config: missing required key \"design\"");
  const json& d = root.at("design");
  if (!d.is_object()) throw ConfigError("design: expected an object");
  const std::string type = get<std::string>(d, "design", "type", "univariate");
  if (type == "univariate") {
    check_keys(d, "design", {"type", "function", "rho"});
    cfg.design = DesignKind::kUnivariate;
    try {
      cfg.univariate.g = parse_structural_function(get<std::string>(d, "design", "function", "abs"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("design.function: ") + e.what());
    }
    cfg.univariate.rho = get<double>(d, "design", "rho", 0.5);
    constraint(std::isfinite(cfg.univariate.rho), "design.rho", "finite");
  } else if (type == "multivariate") {
    check_keys(d, "design", {"type", "design", "iv", "dx", "dz", "rho"});
    cfg.design = DesignKind::kMultivariate;
    auto& m = cfg.multivariate;
    m.design = get<int>(d, "design", "design", 1);
    const std::string iv = get<std::string>(d, "design", "iv", "linear");
    if (iv == "linear") m.iv_type = IvType::kLinear;
    else if (iv == "nonlinear") m.iv_type = IvType::kNonlinear;
    else throw ConfigError("design.iv: expected linear or nonlinear");
    m.dx = get<Index>(d, "design", "dx", 5);
    m.dz = get<Index>(d, "design", "dz", 7);
    m.rho = get<double>(d, "design", "rho", 0.5);
    constraint(m.design == 1 || m.design == 2, "design.design", "1 or 2");
    constraint(m.dx >= 1, "design.dx", ">= 1");
    constraint(m.dz >= m.dx, "design.dz", "d_z >= d_x");
    constraint(std::abs(m.rho) < 1.0, "design.rho", "|rho| < 1");
  } else {
    throw ConfigError("design.type: expected univariate or multivariate");
  }

  cfg.n_train = get<Index>(root, "", "n_train", cfg.n_train);
  cfg.n_val = get<Index>(root, "", "n_val", cfg.n_val);
  cfg.n_test = get<Index>(root, "", "n_test", cfg.n_test);
  cfg.n_reps = get<int>(root, "", "n_reps", cfg.n_reps);
  if (root.contains("base_seed")) {
    const json& s = root.at("base_seed");
    if (!s.is_number_unsigned()) throw ConfigError("base_seed: expected a non-negative integer");
    cfg.base_seed = Seed{s.get<std::uint64_t>()};
  }
  cfg.output = get<std::string>(root, "", "output", cfg.output);
  cfg.timing = get<bool>(root, "", "timing", cfg.timing);
  constraint(cfg.n_train >= 2, "n_train", ">= 2");
  constraint(cfg.n_val >= 0, "n_val", ">= 0");
  constraint(cfg.n_test >= 1, "n_test", ">= 1");
  constraint(cfg.n_reps >= 1, "n_reps", ">= 1");

  if (root.contains("estimators")) {
    const json& e = root.at("estimators");
    check_keys(e, "estimators", {"npiv", "boostiv", "post-boostiv"});
    cfg.npiv.enabled = e.contains("npiv");
    cfg.boostiv.enabled = e.contains("boostiv");
    cfg.post.enabled = e.contains("post-boostiv");
    if (cfg.npiv.enabled) {
      const json& o = e.at("npiv");
      check_keys(o, "estimators.npiv", {"degree", "iv_degree", "interaction"});
      cfg.npiv.degree = get<int>(o, "estimators.npiv", "degree", cfg.npiv.degree);
      cfg.npiv.iv_degree = get<int>(o, "estimators.npiv", "iv_degree", cfg.npiv.iv_degree);
      cfg.npiv.interaction = get<int>(o, "estimators.npiv", "interaction", cfg.npiv.interaction);
      constraint(cfg.npiv.degree >= 1, "estimators.npiv.degree", ">= 1");
      constraint(cfg.npiv.iv_degree == -1 || cfg.npiv.iv_degree >= cfg.npiv.degree, "estimators.npiv.iv_degree",
                 ">= degree (or -1 for the default)");
      constraint(cfg.npiv.interaction >= 0, "estimators.npiv.interaction", ">= 0");
    }
    if (cfg.boostiv.enabled) {
      const std::string w = "estimators.boostiv";
      const json& o = e.at("boostiv");
      auto keys = boost_keys();
      keys.insert({"M", "tune"});
      check_keys(o, w, keys);
      parse_boost_common(o, w, cfg.boostiv.cfg);
      cfg.boostiv.cfg.M = get<int>(o, w, "M", cfg.boostiv.cfg.M);
      cfg.boostiv.tune = get<bool>(o, w, "tune", cfg.boostiv.tune);
      constraint(cfg.boostiv.cfg.M >= 1 && cfg.boostiv.cfg.M <= kIterationBudget, field(w, "M"),
                 "1 <= M <= " + std::to_string(kIterationBudget));
      if (o.contains("grid")) cfg.boostiv.grid = parse_grid(o.at("grid"), field(w, "grid"), cfg.boostiv.grid);
    }
    if (cfg.post.enabled) {
      const std::string w = "estimators.post-boostiv";
      const json& o = e.at("post-boostiv");
      auto keys = boost_keys();
      keys.insert("L");
      check_keys(o, w, keys);
      parse_boost_common(o, w, cfg.post.cfg);
      cfg.post.L = get<int>(o, w, "L", cfg.post.L);
      constraint(cfg.post.L >= 2, field(w, "L"), ">= 2");
      if (o.contains("grid")) cfg.post.grid = parse_grid(o.at("grid"), field(w, "grid"), cfg.post.grid);
    }
    constraint(cfg.npiv.enabled || cfg.boostiv.enabled || cfg.post.enabled, "estimators",
               "at least one estimator enabled");
  }
  constraint(!(cfg.boostiv.enabled && cfg.boostiv.tune) || cfg.n_val >= 1, "n_val",
             ">= 1 when boostiv tuning is on");
  constraint(!cfg.post.enabled || cfg.n_val >= 1, "n_val", ">= 1 when post-boostiv is enabled");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// The resolved config, with every default spelled out.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using namespace bench_detail;
  json j;
  if (cfg.design == DesignKind::kUnivariate) {
    j["design"] = {{"type", "univariate"}, {"function", to_string(cfg.univariate.g)}, {"rho", cfg.univariate.rho}};
  } else {
    const auto& m = cfg.multivariate;
    j["design"] = {{"type", "multivariate"}, {"design", m.design}, {"iv", to_string(m.iv_type)},
                   {"dx", m.dx}, {"dz", m.dz}, {"rho", m.rho}};
  }
  json est = json::object();
  if (cfg.npiv.enabled)
    est["npiv"] = {{"degree", cfg.npiv.degree}, {"iv_degree", cfg.npiv.iv_degree},
                   {"interaction", cfg.npiv.interaction}};
  if (cfg.boostiv.enabled) {
    json b = boost_common_to_json(cfg.boostiv.cfg);
    b["M"] = cfg.boostiv.cfg.M;
    b["tune"] = cfg.boostiv.tune;
    b["grid"] = grid_to_json(cfg.boostiv.grid);
    est["boostiv"] = b;
  }
  if (cfg.post.enabled) {
    json p = boost_common_to_json(cfg.post.cfg);
    p["L"] = cfg.post.L;
    p["grid"] = grid_to_json(cfg.post.grid);
    est["post-boostiv"] = p;
  }
  j["estimators"] = est;
  j["n_train"] = cfg.n_train;
  j["n_val"] = cfg.n_val;
  j["n_test"] = cfg.n_test;
  j["n_reps"] = cfg.n_reps;
  j["base_seed"] = cfg.base_seed.value;
  j["output"] = cfg.output;
  j["timing"] = cfg.timing;
  return j;
}

struct ReportRow {
  std::string estimator;
  int rep = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double bias = 0.0;
  int m_star = 0;
  double wall_ms = 0.0;
  std::string status = "ok";

  bool ok() const { return status == "ok"; }
};

struct Aggregate {
  std::string estimator;
  int n_ok = 0;
  int n_failed = 0;
  double mean_mse = 0.0;
  double median_mse = 0.0;
  double std_mse = 0.0;
  double mean_bias = 0.0;
  double mean_m_star = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReportRow> rows;

  bool all_failed() const {
    return !rows.empty() && std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.ok(); });
  }
};

inline Seed replication_seed(Seed base, int rep) { return derive_seed(base, 0x5EED0000ULL + static_cast<std::uint64_t>(rep)); }

/// Per-estimator summaries in first-appearance order. Failed rows are
/// counted but excluded from the statistics.
inline std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows) {
  std::vector<Aggregate> out;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<const ReportRow*>> ok;
  for (const auto& r : rows) {
    auto it = slot.find(r.estimator);
    if (it == slot.end()) {
      it = slot.emplace(r.estimator, out.size()).first;
      out.push_back(Aggregate{r.estimator});
      ok.emplace_back();
    }
    if (r.ok()) ok[it->second].push_back(&r);
    else ++out[it->second].n_failed;
  }
  for (std::size_t e = 0; e < out.size(); ++e) {
    Aggregate& a = out[e];
    const auto& rs = ok[e];
    a.n_ok = static_cast<int>(rs.size());
    if (rs.empty()) {
      a.mean_mse = a.median_mse = a.std_mse = a.mean_bias = a.mean_m_star = std::nan("");
      continue;
    }
    const double n = static_cast<double>(rs.size());
    std::vector<double> m;
    double bias_sum = 0.0, m_sum = 0.0, mse_sum = 0.0;
    for (const auto* r : rs) {
      m.push_back(r->mse);
      mse_sum += r->mse;
      bias_sum += r->bias;
      m_sum += r->m_star;
    }
    a.mean_mse = mse_sum / n;
    a.mean_bias = bias_sum / n;
    a.mean_m_star = m_sum / n;
    std::sort(m.begin(), m.end());
    const std::size_t h = m.size() / 2;
    a.median_mse = m.size() % 2 ? m[h] : 0.5 * (m[h - 1] + m[h]);
    double ss = 0.0;
    for (double v : m) ss += (v - a.mean_mse) * (v - a.mean_mse);
    a.std_mse = m.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return out;
}

namespace bench_detail {

struct Draw {
  Dataset train;
  Dataset val;
  Matrix test_x;
  Vector truth;
};

inline Draw draw_replication(const ExperimentConfig& cfg, Seed seed) {
  const Index n = cfg.n_train + cfg.n_val;
  SimulatedDraw sd;
  if (cfg.design == DesignKind::kUnivariate) {
    UnivariateSpec s = cfg.univariate;
    s.n = n;
    s.n_test = cfg.n_test;
    sd = gen_univariate(s, seed);
  } else {
    MultivariateSpec s = cfg.multivariate;
    s.n = n;
    s.n_test = cfg.n_test;
    sd = gen_multivariate(s, seed);
  }
  Draw d;
  d.train = sd.data.slice(0, cfg.n_train);
  if (cfg.n_val > 0) d.val = sd.data.slice(cfg.n_train, n);
  d.test_x = std::move(sd.test_x);
  d.truth = std::move(sd.g_true_test);
  return d;
}

inline std::string failure_tag(const std::exception& e) {
  std::string kind = "runtime-error";
  if (dynamic_cast<const std::invalid_argument*>(&e)) kind = "invalid-argument";
  else if (dynamic_cast<const DegenerateScaleError*>(&e)) kind = "degenerate-scale";
  std::string msg = e.what();
  for (char& c : msg)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return "failed:" + kind + ": " + msg;
}

// Returns predictions on the test draw and the chosen M.
inline std::pair<Vector, int> run_estimator(const ExperimentConfig& cfg, const std::string& name, const Draw& d,
                                            Seed fit_seed) {
  if (name == "npiv") {
    SieveSpec spec = default_sieve_spec(d.train.dx(), d.train.dz(), cfg.npiv.degree);
    if (cfg.npiv.iv_degree > 0) spec.iv_degree = cfg.npiv.iv_degree;
    spec.interaction = cfg.npiv.interaction;
    return {npiv_predict(npiv_fit(d.train, spec), d.test_x), 0};
  }
  if (name == "boostiv") {
    BoostConfig c = cfg.boostiv.cfg;
    c.seed = fit_seed;
    if (cfg.boostiv.tune) {
      const TuningResult t = validation_tune(d.train, d.val, cfg.boostiv.grid, c, EstimatorFamily::kBoostIV);
      c.M = t.m_star;
    }
    return {fit_crossfit(d.train, c).predict(d.test_x), c.M};
  }
  BoostConfig c = cfg.post.cfg;
  c.seed = fit_seed;
  PostBoostPath path(d.train, c, cfg.post.L);
  const auto error_at = [&](int m) {
    return mean_squared_error(predict_post(path.model_at(static_cast<std::size_t>(m)), d.val.x()), d.val.y());
  };
  const TuningResult t = early_stopping_walk(cfg.post.grid.points, cfg.post.grid.epsilon_for(d.train.y()), error_at);
  return {predict_post(path.model_at(static_cast<std::size_t>(t.m_star)), d.test_x), t.m_star};
}

inline std::vector<ReportRow> run_replication(const ExperimentConfig& cfg, int rep) {
  const Seed seed = replication_seed(cfg.base_seed, rep);
  std::vector<ReportRow> rows;
  Draw d;
  std::string draw_error;
  try {
    d = draw_replication(cfg, seed);
  } catch (const std::exception& e) {
    draw_error = failure_tag(e);
  }
  const auto names = cfg.estimators();
  for (std::size_t e = 0; e < names.size(); ++e) {
    ReportRow row;
    row.estimator = names[e];
    row.rep = rep;
    row.seed = seed.value;
    if (!draw_error.empty()) {
      row.status = draw_error;
      rows.push_back(row);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto [pred, m] = run_estimator(cfg, names[e], d, derive_seed(seed, 0xE57 + e));
      row.m_star = m;
      row.mse = mse(pred, d.truth);
      row.bias = bias(pred, d.truth);
      if (!std::isfinite(row.mse) || !std::isfinite(row.bias)) row.status = "failed:non-finite-prediction";
    } catch (const std::exception& ex) {
      row.status = failure_tag(ex);
    }
    if (!row.ok()) row.mse = row.bias = 0.0, row.m_star = 0;
    if (cfg.timing)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  return rows;
}

}  // namespace bench_detail

/// Runs every replication, using up to `jobs` worker threads. Row order and
/// values do not depend on scheduling.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, int jobs = 1) {
  require(jobs >= 1, "run_experiment: jobs must be >= 1");
  std::vector<std::vector<ReportRow>> per_rep(static_cast<std::size_t>(cfg.n_reps));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int r = next++; r < cfg.n_reps; r = next++)
      per_rep[static_cast<std::size_t>(r)] = bench_detail::run_replication(cfg, r);
  };
  const int n_threads = std::min(jobs, cfg.n_reps);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  ExperimentReport report{cfg, {}};
  for (auto& rows : per_rep) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  return report;
}

inline constexpr const char* kCsvHeader = "estimator,rep,seed,mse,bias,m_star,wall_ms,status";

inline void write_rows_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows)
    os << r.estimator << ',' << r.rep << ',' << r.seed << ',' << format_double(r.mse) << ','
       << format_double(r.bias) << ',' << r.m_star << ',' << format_double(r.wall_ms) << ',' << r.status << '\n';
}

inline std::vector<ReportRow> read_rows_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw FormatError("results CSV: unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv(line);
    if (c.size() != 8) throw FormatError("results CSV: expected 8 fields in '" + line + "'");
    ReportRow r;
    r.estimator = c[0];
    r.rep = static_cast<int>(detail::parse_int(c[1]));
    r.seed = std::stoull(c[2]);
    r.mse = detail::parse_double(c[3]);
    r.bias = detail::parse_double(c[4]);
    r.m_star = static_cast<int>(detail::parse_int(c[5]));
    r.wall_ms = detail::parse_double(c[6]);
    r.status = c[7];
    rows.push_back(r);
  }
  return rows;
}

/// JSON numbers must be finite; an estimator without any successful rows
/// reports null statistics.
inline nlohmann::json summary_json(const nlohmann::json& config_echo, const std::vector<ReportRow>& rows) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["config"] = config_echo;
  j["rows"] = rows.size();
  nlohmann::json aggs = nlohmann::json::array();
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& a : aggregate(rows))
    aggs.push_back({{"estimator", a.estimator},
                    {"n_ok", a.n_ok},
                    {"n_failed", a.n_failed},
                    {"mean_mse", num(a.mean_mse)},
                    {"median_mse", num(a.median_mse)},
                    {"std_mse", num(a.std_mse)},
                    {"mean_bias", num(a.mean_bias)},
                    {"mean_m_star", num(a.mean_m_star)}});
  j["aggregates"] = aggs;
  return j;
}

/// Writes results.csv and summary.json into `dir`, creating it if needed.
inline void write_report(const ExperimentReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  const fs::path csv = fs::path(dir) / "results.csv";
  const fs::path js = fs::path(dir) / "summary.json";
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw IoError("cannot write " + csv.string());
    write_rows_csv(out, report.rows);
    if (!out) throw IoError("write failed for " + csv.string());
  }
  std::ofstream out(js, std::ios::binary);
  if (!out) throw IoError("cannot write " + js.string());
  out << summary_json(config_to_json(report.config), report.rows).dump(2) << '\n';
  if (!out) throw IoError("write failed for " + js.string());
}

}  // namespace boostiv
