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

// Helpers shared by the unit tests: random inputs and oracles built on
// explicit pseudo-inverses rather than the library's solvers.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "boostiv/core.hpp"
#include "boostiv/learners.hpp"

namespace testing_util {

using boostiv::Index;
using boostiv::Matrix;
using boostiv::Vector;

inline Matrix random_matrix(boostiv::Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(boostiv::Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

// Explicit pseudo-inverse through a complete orthogonal decomposition.
inline Matrix pinv(const Matrix& a) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  cod.setThreshold(1e-10);
  return cod.pseudoInverse();
}

inline Vector projection_oracle(const Matrix& h, const Vector& v) { return h * (pinv(h) * v); }

struct BruteStump {
  Index feature = 0;
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
  double loss = std::numeric_limits<double>::infinity();
};

// All midpoints between consecutive distinct values, every feature, with an
// explicit P_H and a pseudo-inverse 2-column least squares per split.
inline BruteStump brute_force_stump(const Vector& r, const Matrix& x, const Matrix& h) {
  const Index n = x.rows();
  const Matrix p = h * pinv(h);
  BruteStump best;
  best.loss = r.squaredNorm();
  bool any = false;
  for (Index j = 0; j < x.cols(); ++j) {
    std::vector<double> vals(x.col(j).data(), x.col(j).data() + n);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t c = 0; c + 1 < vals.size(); ++c) {
      const double t = 0.5 * (vals[c] + vals[c + 1]);
      Matrix d(n, 2);
      for (Index i = 0; i < n; ++i) {
        d(i, 0) = x(i, j) <= t ? 1.0 : 0.0;
        d(i, 1) = 1.0 - d(i, 0);
      }
      const Matrix pd = p * d;
      const Vector coef = pinv(pd) * r;
      const double loss = (r - pd * coef).squaredNorm();
      if (!any || loss < best.loss - 1e-12) {
        any = true;
        best = {j, t, coef(0), coef(1), loss};
      }
    }
  }
  return best;
}

// Projected loss of a given stump against residual r under H.
inline double projected_loss(const Vector& r, const Matrix& x, const Matrix& h, const boostiv::StumpBasis& s) {
  const Vector phi = boostiv::predict_stump(s, x);
  return (r - projection_oracle(h, phi)).squaredNorm();
}

}  // namespace testing_util
