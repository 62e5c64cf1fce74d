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

#include <stdexcept>

#include <gtest/gtest.h>

#include "boostiv/dgp.hpp"
#include "boostiv/postprocess.hpp"
#include "test_util.hpp"

namespace boostiv {
namespace {

using testing_util::random_matrix;
using testing_util::random_vector;

BoostConfig config(int m, std::uint64_t seed = 3) {
  BoostConfig c;
  c.M = m;
  c.seed = Seed{seed};
  return c;
}

Dataset sample(std::uint64_t seed, Index n = 400) {
  UnivariateSpec spec;
  spec.n = n;
  spec.n_test = 1;
  return gen_univariate(spec, Seed{seed}).data;
}

TEST(FitPost, ConstantBasisGivesFoldMean) {
  Rng rng(Seed{1});
  const Index n = 40;
  const Dataset d(random_vector(rng, n), Matrix::Ones(n, 1), random_matrix(rng, n, 2));
  PostBoostPath path(d, config(1), 2);
  const PostBoostModel m = path.model_at(1);
  for (int l = 0; l < 2; ++l) {
    const Vector p = predict_post_fold(m.folds[static_cast<std::size_t>(l)], path.fold_x(l));
    for (Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p(i), path.fold_y(l).mean(), 1e-12);
  }
}

TEST(FitPost, DuplicatedBasesSplitWeights) {
  Rng rng(Seed{2});
  const Matrix x = random_matrix(rng, 50, 1);
  const Vector y = random_vector(rng, 50);
  BoostIVModel inner;
  inner.dx = 1;
  const StumpBasis s{0, 0.1, 1.0, -0.5};
  inner.folds.push_back({0.0, {s, s}});
  const Matrix both = post_design(inner, x, 2);
  const Matrix one = post_design(inner, x, 1);
  const Vector b2 = least_squares(both, y);
  const Vector b1 = least_squares(one, y);
  EXPECT_NEAR(b2(1), b2(2), 1e-10);
  EXPECT_NEAR(b2(1) + b2(2), b1(1), 1e-10);
  EXPECT_LE((both * b2 - one * b1).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(FitPost, InFoldLeastSquaresOptimality) {
  const Dataset d = sample(11);
  PostBoostPath path(d, config(40), 2);
  const PostBoostModel m = path.model_at(40);
  Rng rng(Seed{3});
  for (int l = 0; l < 2; ++l) {
    const auto& outer = m.folds[static_cast<std::size_t>(l)];
    const Matrix phi = post_design(outer.inner, path.fold_x(l), 40);
    const Vector& y = path.fold_y(l);
    const double ssr = (y - phi * outer.beta).squaredNorm();
    // oracle: explicit pseudo-inverse
    const Vector oracle = testing_util::pinv(phi) * y;
    EXPECT_LE(std::abs(ssr - (y - phi * oracle).squaredNorm()), 1e-8 * (1 + ssr));
    for (int t = 0; t < 100; ++t) {
      const Vector b = outer.beta + 0.1 * random_vector(rng, outer.beta.size());
      EXPECT_LE(ssr, (y - phi * b).squaredNorm() + 1e-10);
      EXPECT_LE(ssr, (y - phi * random_vector(rng, outer.beta.size())).squaredNorm() + 1e-10);
    }
    // implied boostIV weights: averaged intercept, every slope nu
    Vector implied = Vector::Constant(outer.beta.size(), outer.inner.nu);
    implied(0) = 0.0;
    for (const auto& f : outer.inner.folds) implied(0) += f.intercept / outer.inner.k();
    EXPECT_LE(ssr, (y - phi * implied).squaredNorm() + 1e-10);
  }
}

TEST(FitPost, ImpliedWeightsReproduceInnerBoostIV) {
  const Dataset d = sample(12, 200);
  const PostBoostModel m = fit_post(d, config(15), 2);
  const auto& outer = m.folds[0];
  Vector implied = Vector::Constant(16, outer.inner.nu);
  implied(0) = 0.0;
  for (const auto& f : outer.inner.folds) implied(0) += f.intercept / outer.inner.k();
  const Matrix x = d.x().topRows(30);
  EXPECT_LE((post_design(outer.inner, x, 15) * implied - outer.inner.predict(x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictPost, IdenticalFoldsAverageToOne) {
  const Dataset d = sample(13, 200);
  PostBoostModel m = fit_post(d, config(10), 2);
  m.folds[1] = m.folds[0];
  const Matrix x = d.x().topRows(20);
  EXPECT_LE((predict_post(m, x) - predict_post_fold(m.folds[0], x)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictPost, InterceptOnlyWeightsAreConstant) {
  const Dataset d = sample(14, 200);
  PostBoostModel m = fit_post(d, config(10), 2);
  for (auto& f : m.folds) {
    f.beta.setZero();
    f.beta(0) = 1.25;
  }
  const Vector p = predict_post(m, d.x());
  EXPECT_TRUE((p.array() == 1.25).all());
  EXPECT_THROW(predict_post(m, Matrix::Zero(3, 2)), std::invalid_argument);
}

TEST(PredictPost, OuterFoldOrderDoesNotMatter) {
  const Dataset d = sample(15, 300);
  PostBoostModel m = fit_post(d, config(20), 3);
  const Vector a = predict_post(m, d.x());
  std::reverse(m.folds.begin(), m.folds.end());
  EXPECT_LE((predict_post(m, d.x()) - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FitPost, Reproducible) {
  const Dataset d = sample(16, 300);
  const Vector a = predict_post(fit_post(d, config(25, 9), 2), d.x());
  const Vector b = predict_post(fit_post(d, config(25, 9), 2), d.x());
  EXPECT_EQ(a, b);
}

TEST(FitPost, Errors) {
  const Dataset d = sample(17, 100);
  EXPECT_THROW(fit_post(d, config(0), 2), std::invalid_argument);
  EXPECT_THROW(fit_post(d, config(5), 1), std::invalid_argument);
}

TEST(FitPost, PathMatchesFreshFit) {
  const Dataset d = sample(18, 200);
  PostBoostPath path(d, config(30), 2);
  path.model_at(10);
  const PostBoostModel a = path.model_at(30);
  const PostBoostModel b = fit_post(d, config(30), 2);
  EXPECT_EQ(predict_post(a, d.x()), predict_post(b, d.x()));
}

// Tuned post-boostIV against boostIV at the default M on the univariate abs
// design, paired by seed.
TEST(PostVersusBoostIV, UnivariateAbsDominanceFrequency) {
  int wins = 0;
  for (int s = 0; s < 20; ++s) {
    UnivariateSpec spec;
    spec.n = 1500;
    const SimulatedDraw draw = gen_univariate(spec, Seed{7000 + static_cast<std::uint64_t>(s)});
    const Dataset train = draw.data.slice(0, 1000);
    const Dataset val = draw.data.slice(1000, 1500);
    BoostConfig c = config(5000, 40 + static_cast<std::uint64_t>(s));
    const double boost = mse(fit_crossfit(train, c).predict(draw.test_x), draw.g_true_test);
    PostBoostPath path(train, c, 2);
    int best_m = 50;
    double prev = std::numeric_limits<double>::infinity();
    for (int m = 50; m <= 500; m += 50) {
      const Vector pv = predict_post(path.model_at(static_cast<std::size_t>(m)), val.x());
      const double err = (pv - val.y()).squaredNorm() / static_cast<double>(val.n());
      if (err > prev + 1e-4 * variance(train.y())) break;
      prev = err;
      best_m = m;
    }
    const double post = mse(predict_post(path.model_at(static_cast<std::size_t>(best_m)), draw.test_x),
                            draw.g_true_test);
    wins += post <= boost;
  }
  EXPECT_GE(wins, 12) << "post-boostIV matched or beat boostIV on " << wins << " of 20 seeds";
}

}  // namespace
}  // namespace boostiv
