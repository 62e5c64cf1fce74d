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

// post-boostIV: an outer cross-fitting layer that relearns the weights on
// the basis functions found by boostIV. For each outer fold l, boostIV runs
// on the complement, its M fold-averaged stumps are evaluated on fold l,
// and y is regressed on [1, phi_1, ..., phi_M] there. The prediction is the
// average of the L fold fits.

#include <memory>
#include <vector>

#include "boostiv/boosting.hpp"
#include "boostiv/core.hpp"

namespace boostiv {

struct PostBoostModel {
  struct Outer {
    BoostIVModel inner;  // truncated to M iterations
    Vector beta;         // length M + 1, intercept first
  };

  std::vector<Outer> folds;
  Index dx = 0;

  int l() const { return static_cast<int>(folds.size()); }
  std::size_t iterations() const { return folds.empty() ? 0 : folds.front().inner.iterations(); }
};

/// [1, phi_1(x), ..., phi_M(x)] for one outer fold's inner model.
inline Matrix post_design(const BoostIVModel& inner, const Matrix& x, std::size_t m) {
  Matrix phi(x.rows(), static_cast<Index>(m) + 1);
  phi.col(0).setOnes();
  for (std::size_t t = 1; t <= m; ++t) phi.col(static_cast<Index>(t)) = inner.averaged_basis(x, t);
  return phi;
}

inline Vector predict_post_fold(const PostBoostModel::Outer& outer, const Matrix& x) {
  const std::size_t m = static_cast<std::size_t>(outer.beta.size() - 1);
  return post_design(outer.inner, x, m) * outer.beta;
}

inline Vector predict_post(const PostBoostModel& model, const Matrix& x) {
  require(!model.folds.empty(), "predict_post: empty model");
  require(x.cols() == model.dx, "predict_post: regressor column count mismatch");
  Vector out = predict_post_fold(model.folds[0], x);
  for (std::size_t l = 1; l < model.folds.size(); ++l) out += predict_post_fold(model.folds[l], x);
  return out / static_cast<double>(model.folds.size());
}

/// Seeds used inside post-boostIV, all derived from cfg.seed.
inline Seed outer_partition_seed(Seed s) { return derive_seed(s, 0x9057); }
inline Seed inner_seed(Seed s, int outer_fold) { return derive_seed(s, 0x1000 + static_cast<std::uint64_t>(outer_fold)); }

/// Incremental post-boostIV. Keeps one boostIV path per outer fold so the
/// weights for any M can be refitted without restarting the inner fits.
class PostBoostPath {
 public:
  PostBoostPath(const Dataset& data, const BoostConfig& cfg, int outer_folds) : dx_(data.dx()) {
    cfg.validate();
    require(outer_folds >= 2, "fit_post: L must be >= 2");
    const FoldAssignment outer = partition(data.n(), outer_folds, outer_partition_seed(cfg.seed));
    for (int l = 0; l < outer_folds; ++l) {
      auto f = std::make_unique<Outer>();
      const Dataset held = data.subset(outer.in_fold(l));
      f->x = held.x();
      f->y = held.y();
      BoostConfig inner = cfg;
      inner.seed = inner_seed(cfg.seed, l);
      f->path = std::make_unique<BoostIVPath>(data.subset(outer.out_of_fold(l)), inner,
                                              BoostIVPath::Scheme::kCrossFit);
      f->design = Matrix::Ones(f->x.rows(), 1);
      folds_.push_back(std::move(f));
    }
  }

  int l() const { return static_cast<int>(folds_.size()); }

  /// Weights refitted on the first m bases of every outer fold.
  PostBoostModel model_at(std::size_t m) {
    require(m >= 1, "fit_post: M must be >= 1");
    PostBoostModel model;
    model.dx = dx_;
    for (auto& f : folds_) {
      f->path->advance_to(m);
      const BoostIVModel& inner = f->path->model();
      const auto have = static_cast<std::size_t>(f->design.cols() - 1);
      if (have < m) {
        f->design.conservativeResize(Eigen::NoChange, static_cast<Index>(m) + 1);
        for (std::size_t t = have + 1; t <= m; ++t)
          f->design.col(static_cast<Index>(t)) = inner.averaged_basis(f->x, t);
      }
      PostBoostModel::Outer o;
      o.inner = inner.truncated(m);
      o.beta = least_squares(Matrix(f->design.leftCols(static_cast<Index>(m) + 1)), f->y);
      model.folds.push_back(std::move(o));
    }
    return model;
  }

  /// Held-out rows of outer fold l.
  const Matrix& fold_x(int l) const { return folds_.at(static_cast<std::size_t>(l))->x; }
  const Vector& fold_y(int l) const { return folds_.at(static_cast<std::size_t>(l))->y; }

 private:
  struct Outer {
    Matrix x;
    Vector y;
    std::unique_ptr<BoostIVPath> path;
    Matrix design;  // [1, phi_1, ..., phi_m] on x, grown on demand
  };

  Index dx_;
  std::vector<std::unique_ptr<Outer>> folds_;
};

/// post-boostIV with L outer folds and cfg.M inner iterations.
inline PostBoostModel fit_post(const Dataset& data, const BoostConfig& cfg, int outer_folds) {
  require(cfg.M >= 1, "fit_post: M must be >= 1");
  PostBoostPath path(data, cfg, outer_folds);
  return path.model_at(static_cast<std::size_t>(cfg.M));
}

}  // namespace boostiv
