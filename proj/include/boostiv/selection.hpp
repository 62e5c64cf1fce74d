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

// Choosing the number of boosting iterations. Both routines walk a sorted
// grid and stop at the first point whose error exceeds the previous
// point's by more than epsilon, returning that previous point; if that
// never happens the last grid point is returned.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "boostiv/boosting.hpp"
#include "boostiv/core.hpp"
#include "boostiv/postprocess.hpp"

namespace boostiv {

/// Largest iteration count any grid may request.
inline constexpr int kIterationBudget = 100000;

struct TuningGrid {
  std::vector<int> points;
  /// Early-stop tolerance. Unset means 1e-4 * Var(y) of the training data.
  std::optional<double> epsilon;

  void validate(int budget = kIterationBudget) const {
    require(!points.empty(), "TuningGrid: grid must be non-empty");
    for (std::size_t i = 0; i < points.size(); ++i) {
      require(points[i] >= 1, "TuningGrid: grid entries must be >= 1");
      require(points[i] <= budget, "TuningGrid: grid point " + std::to_string(points[i]) +
                                       " exceeds the iteration budget of " + std::to_string(budget));
      if (i > 0) require(points[i] > points[i - 1], "TuningGrid: grid must be strictly increasing");
    }
    if (epsilon) require(*epsilon >= 0.0, "TuningGrid: epsilon must be >= 0");
  }

  int max() const { return points.back(); }

  double epsilon_for(const Vector& y) const { return epsilon ? *epsilon : 1e-4 * variance(y); }

  /// step, 2 step, ..., up to and including max_m.
  static TuningGrid linear(int step, int max_m) {
    require(step >= 1 && max_m >= step, "TuningGrid::linear: need 1 <= step <= max");
    TuningGrid g;
    for (int m = step; m <= max_m; m += step) g.points.push_back(m);
    if (g.points.back() != max_m) g.points.push_back(max_m);
    return g;
  }
};

struct TuningResult {
  int m_star = 0;
  std::vector<std::pair<int, double>> cv_curve;
  bool stopped_early = false;
};

/// The grid walk with the error evaluator injected.
inline TuningResult early_stopping_walk(const std::vector<int>& grid, double epsilon,
                                        const std::function<double(int)>& error_at) {
  require(!grid.empty(), "early_stopping_walk: empty grid");
  TuningResult out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double err = error_at(grid[i]);
    out.cv_curve.emplace_back(grid[i], err);
    if (i > 0 && err > out.cv_curve[i - 1].second + epsilon) {
      out.m_star = grid[i - 1];
      out.stopped_early = true;
      return out;
    }
  }
  out.m_star = grid.back();
  return out;
}

enum class EstimatorFamily { kNaiveBoostIV, kBoostIV, kPostBoostIV };

inline std::string to_string(EstimatorFamily f) {
  switch (f) {
    case EstimatorFamily::kNaiveBoostIV: return "naive-boostiv";
    case EstimatorFamily::kBoostIV: return "boostiv";
    case EstimatorFamily::kPostBoostIV: return "post-boostiv";
  }
  return "?";
}

/// A fit that can be evaluated at any M of a grid, reusing one boosting
/// path: boostIV at M' is a prefix of boostIV at a larger M, and
/// post-boostIV only reruns its weight regression.
class PathEvaluator {
 public:
  PathEvaluator(const Dataset& train, const BoostConfig& cfg, EstimatorFamily family, int outer_folds) {
    switch (family) {
      case EstimatorFamily::kNaiveBoostIV:
        boost_ = std::make_unique<BoostIVPath>(train, cfg, BoostIVPath::Scheme::kNaive);
        break;
      case EstimatorFamily::kBoostIV:
        boost_ = std::make_unique<BoostIVPath>(train, cfg, BoostIVPath::Scheme::kCrossFit);
        break;
      case EstimatorFamily::kPostBoostIV:
        post_ = std::make_unique<PostBoostPath>(train, cfg, outer_folds);
        break;
    }
  }

  Vector predict(int m, const Matrix& x) {
    if (boost_) {
      boost_->advance_to(static_cast<std::size_t>(m));
      return boost_->model().predict(x, static_cast<std::size_t>(m));
    }
    return predict_post(post_->model_at(static_cast<std::size_t>(m)), x);
  }

 private:
  std::unique_ptr<BoostIVPath> boost_;
  std::unique_ptr<PostBoostPath> post_;
};

inline double mean_squared_error(const Vector& pred, const Vector& y) {
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

/// Fold split used by cv_early_stopping.
inline FoldAssignment cv_partition(Index n, int k, Seed seed) { return partition(n, k, derive_seed(seed, 0xC5)); }

/// k-fold CV with early stopping. The fold split is drawn from cfg.seed.
inline TuningResult cv_early_stopping(const Dataset& data, const TuningGrid& grid, int k, EstimatorFamily family,
                                      const BoostConfig& cfg, int outer_folds = 2,
                                      int budget = kIterationBudget) {
  require(k >= 2, "cv_early_stopping: k must be >= 2");
  grid.validate(budget);
  const FoldAssignment folds = cv_partition(data.n(), k, cfg.seed);
  std::vector<std::unique_ptr<PathEvaluator>> paths;
  std::vector<Dataset> held;
  // Every fold's fit uses cfg.seed itself, so relabeling the folds only
  // permutes the terms of the average.
  for (int f = 0; f < k; ++f) {
    paths.push_back(std::make_unique<PathEvaluator>(data.subset(folds.out_of_fold(f)), cfg, family, outer_folds));
    held.push_back(data.subset(folds.in_fold(f)));
  }
  const auto error_at = [&](int m) {
    double total = 0.0;
    for (int f = 0; f < k; ++f) {
      const auto i = static_cast<std::size_t>(f);
      total += mean_squared_error(paths[i]->predict(m, held[i].x()), held[i].y());
    }
    return total / static_cast<double>(k);
  };
  return early_stopping_walk(grid.points, grid.epsilon_for(data.y()), error_at);
}

/// Tuning on a held-out validation slice: a single fit on train, evaluated
/// at each grid point on val.
inline TuningResult validation_tune(const Dataset& train, const Dataset& val, const TuningGrid& grid,
                                    const BoostConfig& cfg,
                                    EstimatorFamily family = EstimatorFamily::kBoostIV, int outer_folds = 2,
                                    int budget = kIterationBudget) {
  require(val.n() >= 1, "validation_tune: validation set is empty");
  require(train.dx() == val.dx() && train.dz() == val.dz(),
          "validation_tune: train and validation columns differ");
  grid.validate(budget);
  PathEvaluator path(train, cfg, family, outer_folds);
  const auto error_at = [&](int m) { return mean_squared_error(path.predict(m, val.x()), val.y()); };
  return early_stopping_walk(grid.points, grid.epsilon_for(train.y()), error_at);
}

}  // namespace boostiv
