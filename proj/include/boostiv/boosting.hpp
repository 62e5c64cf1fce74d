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

// boostIV: L2 boosting of regression stumps where each stump is chosen by
// how well its instrument projection explains the current residual.
//
//   g_0 = mean(y)
//   for m = 1..M:
//     first stage:  H = [1, g_1(Z), ..., g_p(Z)]
//     second stage: phi_m = argmin_phi || r_m - P_H phi ||^2   (stumps)
//     update:       g_m = g_{m-1} + nu * phi_m,  r_{m+1} = y - g_m(x)
//
// The cross-fitted variant learns the first stage on the complement of
// each fold, boosts one ensemble per fold, and averages the K ensembles.

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "boostiv/core.hpp"
#include "boostiv/learners.hpp"

namespace boostiv {

class DegenerateScaleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoostConfig {
  int M = 5000;
  double nu = 0.1;
  int K = 2;
  InstrumentLearnerSpec instrument;
  Seed seed{0};
  /// Optional bound on |leaf|; 0 disables it.
  double leaf_cap = 0.0;
  /// From the second iteration on, use D(z) / sigma^2 built from the
  /// previous stump as the instrument matrix.
  bool optimal_instruments = false;
  /// Cap on split candidates per feature. The candidates come from all rows
  /// passed to the fit and are shared by every fold.
  int max_thresholds = static_cast<int>(kMaxThresholds);

  void validate() const {
    require(M >= 0, "BoostConfig: M must be >= 0");
    require(nu > 0.0 && nu <= 1.0, "BoostConfig: nu must be in (0, 1]");
    require(leaf_cap >= 0.0, "BoostConfig: leaf_cap must be >= 0");
    require(max_thresholds >= 1, "BoostConfig: max_thresholds must be >= 1");
    instrument.validate();
  }
};

enum class FitStatus { kOk, kDegenerateOutcome };

/// Additive stump ensembles, one per fold (a single one for the naive
/// estimator). Fold k predicts intercept_k + nu * sum_m phi_m^k(x); the
/// model predicts the average over folds.
struct BoostIVModel {
  struct Fold {
    double intercept = 0.0;
    std::vector<StumpBasis> stumps;
  };

  std::vector<Fold> folds;
  double nu = 0.1;
  Index dx = 0;
  FitStatus status = FitStatus::kOk;

  int k() const { return static_cast<int>(folds.size()); }

  /// Number of boosting iterations held by every fold.
  std::size_t iterations() const {
    if (folds.empty()) return 0;
    std::size_t m = folds.front().stumps.size();
    for (const auto& f : folds) m = std::min(m, f.stumps.size());
    return m;
  }

  Vector predict_fold(std::size_t fold, const Matrix& x, std::size_t m) const {
    require(x.cols() == dx, "predict: regressor column count mismatch (expected " +
                                std::to_string(dx) + ", got " + std::to_string(x.cols()) + ")");
    const Fold& f = folds.at(fold);
    Vector out = Vector::Constant(x.rows(), f.intercept);
    const std::size_t upto = std::min(m, f.stumps.size());
    for (std::size_t t = 0; t < upto; ++t) accumulate_stump(f.stumps[t], x, nu, out);
    return out;
  }

  /// Fold average of the first m iterations.
  Vector predict(const Matrix& x, std::size_t m) const {
    require(!folds.empty(), "predict: empty model");
    Vector out = predict_fold(0, x, m);
    for (std::size_t k = 1; k < folds.size(); ++k) out += predict_fold(k, x, m);
    return out / static_cast<double>(folds.size());
  }

  Vector predict(const Matrix& x) const { return predict(x, iterations()); }

  /// The m-th fold-averaged basis function (1-based m): (1/K) sum_k phi_m^k(x),
  /// without shrinkage.
  Vector averaged_basis(const Matrix& x, std::size_t m) const {
    require(m >= 1 && m <= iterations(), "averaged_basis: iteration out of range");
    Vector out = Vector::Zero(x.rows());
    for (const auto& f : folds) accumulate_stump(f.stumps[m - 1], x, 1.0, out);
    return out / static_cast<double>(folds.size());
  }

  /// Copy keeping only the first m iterations of every fold.
  BoostIVModel truncated(std::size_t m) const {
    BoostIVModel out = *this;
    for (auto& f : out.folds)
      if (f.stumps.size() > m) f.stumps.resize(m);
    return out;
  }
};

inline Vector predict(const BoostIVModel& model, const Matrix& x) { return model.predict(x); }

// ---------------------------------------------------------------------------
// Optimal instruments
// ---------------------------------------------------------------------------

/// D(z) / sigma^2 for a leaf-parameterized stump. The derivative proxies are
/// -u_L(x) and -u_R(x) of the previous stump, regressed on Z with the
/// configured learner; sigma^2 is the mean squared residual.
class OptimalInstrument {
 public:
  OptimalInstrument(const Matrix& x, const Matrix& z, const StumpBasis& previous, const Vector& residuals,
                    InstrumentLearnerSpec spec) {
    require(x.rows() == z.rows(), "optimal_instrument_features: X and Z row counts differ");
    require(residuals.size() >= 1, "optimal_instrument_features: need residuals");
    sigma2_ = residuals.squaredNorm() / static_cast<double>(residuals.size());
    if (!(sigma2_ > 0.0)) throw DegenerateScaleError("optimal_instrument_features: sigma^2 is zero");
    if (spec.target == InstrumentTarget::kSieve || spec.target == InstrumentTarget::kPreviousBasis)
      spec.target = InstrumentTarget::kReducedForm;
    Matrix proxies(x.rows(), 2);
    for (Index i = 0; i < x.rows(); ++i) {
      const bool left = x(i, previous.feature) <= previous.threshold;
      proxies(i, 0) = left ? -1.0 : 0.0;
      proxies(i, 1) = left ? 0.0 : -1.0;
    }
    eta_ = std::make_shared<InstrumentTransform>(fit_instrument_learner(z, proxies, spec));
  }

  double sigma2() const { return sigma2_; }

  /// Conditional-mean estimate of the derivative proxies, one column each.
  Matrix derivative(const Matrix& z) const { return eta_->predict(z); }

  InstrumentFeatures features(const Matrix& z) const {
    const Matrix d = derivative(z) / sigma2_;
    InstrumentFeatures f;
    f.h.resize(z.rows(), d.cols() + 1);
    f.h.col(0).setOnes();
    f.h.rightCols(d.cols()) = d;
    return f;
  }

 private:
  std::shared_ptr<const InstrumentTransform> eta_;
  double sigma2_ = 0.0;
};

/// H = [1, D(z) / sigma^2] from the last stump in prev_bases.
inline InstrumentFeatures optimal_instrument_features(const Matrix& x, const Matrix& z,
                                                      const std::vector<StumpBasis>& prev_bases,
                                                      const Vector& residuals,
                                                      const InstrumentLearnerSpec& spec) {
  require(!prev_bases.empty(), "optimal_instrument_features: needs a previous iteration");
  return OptimalInstrument(x, z, prev_bases.back(), residuals, spec).features(z);
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Incremental boostIV fit. Holds the per-fold residuals and first-stage
/// state so the path can be extended one iteration at a time; the model
/// after m steps is identical to a fresh fit with M = m.
class BoostIVPath {
 public:
  enum class Scheme { kNaive, kCrossFit };

  /// Per-iteration record of the second stage, one entry per fold.
  struct StepTrace {
    std::vector<double> residual_ss;   // ||r_m||^2 before the update
    std::vector<double> projected_loss;
  };

  BoostIVPath(const Dataset& data, BoostConfig cfg, Scheme scheme) : cfg_(std::move(cfg)) {
    cfg_.validate();
    model_.nu = cfg_.nu;
    model_.dx = data.dx();

    std::vector<std::vector<Index>> in_rows;
    std::vector<std::vector<Index>> out_rows;
    if (scheme == Scheme::kNaive) {
      std::vector<Index> all(static_cast<std::size_t>(data.n()));
      for (Index i = 0; i < data.n(); ++i) all[static_cast<std::size_t>(i)] = i;
      in_rows.push_back(all);
      out_rows.push_back(all);
    } else {
      require(cfg_.K >= 2, "fit_crossfit: K must be >= 2");
      require(static_cast<Index>(cfg_.K) * 2 <= data.n(),
              "fit_crossfit: K must be <= n / 2 so every fold has at least two rows");
      const FoldAssignment folds = partition(data.n(), cfg_.K, cfg_.seed);
      for (int k = 0; k < cfg_.K; ++k) {
        in_rows.push_back(folds.in_fold(k));
        out_rows.push_back(folds.out_of_fold(k));
      }
    }

    if (variance(data.y()) == 0.0) model_.status = FitStatus::kDegenerateOutcome;
    const auto thresholds = candidate_thresholds(data.x(), static_cast<std::size_t>(cfg_.max_thresholds));

    for (std::size_t k = 0; k < in_rows.size(); ++k) {
      auto f = std::make_unique<FoldState>();
      f->x = select_rows(data.x(), in_rows[k]);
      f->z = select_rows(data.z(), in_rows[k]);
      f->y = select_rows(data.y(), in_rows[k]);
      f->x_fit = select_rows(data.x(), out_rows[k]);
      f->z_fit = select_rows(data.z(), out_rows[k]);
      require(f->x.rows() >= 2, "fit_crossfit: fold has fewer than two rows");
      f->sorted = SortedFeatures(f->x, thresholds);
      BoostIVModel::Fold mf;
      mf.intercept = f->y.mean();
      f->r = f->y.array() - mf.intercept;
      model_.folds.push_back(mf);
      folds_.push_back(std::move(f));
    }
  }

  const BoostConfig& config() const { return cfg_; }
  const BoostIVModel& model() const { return model_; }
  std::size_t iterations() const { return model_.iterations(); }
  const std::vector<StepTrace>& trace() const { return trace_; }

  /// Residual of fold k on its own rows.
  const Vector& residual(std::size_t k) const { return folds_.at(k)->r; }

  void advance_to(std::size_t m) {
    while (iterations() < m) step();
  }

  void step() {
    StepTrace tr;
    const std::size_t m = iterations();
    for (std::size_t k = 0; k < folds_.size(); ++k) {
      FoldState& f = *folds_[k];
      auto& mf = model_.folds[k];
      if (model_.status == FitStatus::kDegenerateOutcome) {
        mf.stumps.push_back(StumpBasis{0, 0.0, 0.0, 0.0});
        tr.residual_ss.push_back(f.r.squaredNorm());
        tr.projected_loss.push_back(f.r.squaredNorm());
        continue;
      }
      const ProjectedStumpFitter& fitter = first_stage(f, mf, m);
      const StumpFit fit = fitter.fit(f.r, cfg_.leaf_cap);
      tr.residual_ss.push_back(f.r.squaredNorm());
      tr.projected_loss.push_back(fit.loss);
      for (Index i = 0; i < f.x.rows(); ++i) f.r(i) -= cfg_.nu * fit.stump(f.x(i, fit.stump.feature));
      mf.stumps.push_back(fit.stump);
    }
    trace_.push_back(std::move(tr));
  }

 private:
  struct FoldState {
    Matrix x, z, x_fit, z_fit;
    Vector y, r;
    SortedFeatures sorted;
    std::unique_ptr<ProjectedStumpFitter> fitter;
  };

  // Builds (or reuses) the instrument matrix for fold f at iteration m
  // (0-based) and returns the stump search bound to it.
  const ProjectedStumpFitter& first_stage(FoldState& f, const BoostIVModel::Fold& mf, std::size_t m) {
    const auto& spec = cfg_.instrument;
    if (cfg_.optimal_instruments && m >= 1) {
      const OptimalInstrument opt(f.x_fit, f.z_fit, mf.stumps.back(), f.r, spec);
      f.fitter = std::make_unique<ProjectedStumpFitter>(f.sorted, opt.features(f.z).h);
      return *f.fitter;
    }
    if (spec.target == InstrumentTarget::kPreviousBasis) {
      Vector prev;
      if (m == 0) {
        prev = Vector::Constant(f.x_fit.rows(), mf.intercept);
      } else {
        prev = predict_stump(mf.stumps.back(), f.x_fit);
      }
      const InstrumentTransform eta = fit_instrument_learner(f.z_fit, prev, spec);
      f.fitter = std::make_unique<ProjectedStumpFitter>(f.sorted, instrument_features(eta, f.z).h);
      return *f.fitter;
    }
    if (!f.fitter) {
      const InstrumentTransform eta = fit_instrument_learner(f.z_fit, f.x_fit, spec);
      f.fitter = std::make_unique<ProjectedStumpFitter>(f.sorted, instrument_features(eta, f.z).h);
    }
    return *f.fitter;
  }

  BoostConfig cfg_;
  BoostIVModel model_;
  std::vector<std::unique_ptr<FoldState>> folds_;
  std::vector<StepTrace> trace_;
};

/// Naive boostIV: the first stage and the stumps share all rows.
/// A constant outcome yields the intercept-only model with
/// status kDegenerateOutcome.
inline BoostIVModel fit_naive(const Dataset& data, const BoostConfig& cfg) {
  BoostIVPath path(data, cfg, BoostIVPath::Scheme::kNaive);
  if (path.model().status == FitStatus::kDegenerateOutcome) return path.model();
  path.advance_to(static_cast<std::size_t>(cfg.M));
  return path.model();
}

/// Cross-fitted boostIV with cfg.K folds.
inline BoostIVModel fit_crossfit(const Dataset& data, const BoostConfig& cfg) {
  BoostIVPath path(data, cfg, BoostIVPath::Scheme::kCrossFit);
  if (path.model().status == FitStatus::kDegenerateOutcome) return path.model();
  path.advance_to(static_cast<std::size_t>(cfg.M));
  return path.model();
}

}  // namespace boostiv
