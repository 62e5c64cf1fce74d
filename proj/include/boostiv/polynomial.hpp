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

#include <string>
#include <vector>

#include "boostiv/core.hpp"

namespace boostiv {

/// Monomial design: intercept plus every monomial of total degree <= degree
/// in which at most `interaction` distinct variables appear. Columns are
/// ordered by total degree, then lexicographically with the first variable's
/// exponent descending: for two variables and degree 2 this is
/// 1, x1, x2, x1^2, x1 x2, x2^2.
class PolynomialBasis {
 public:
  PolynomialBasis() = default;

  PolynomialBasis(Index n_vars, int degree, int interaction = 0) : n_vars_(n_vars), degree_(degree) {
    require(n_vars >= 1, "PolynomialBasis: need at least one variable");
    require(degree >= 1, "PolynomialBasis: degree must be >= 1");
    interaction_ = interaction <= 0 ? degree : interaction;
    require(interaction_ >= 1, "PolynomialBasis: interaction order must be >= 1");
    exponents_.emplace_back(static_cast<std::size_t>(n_vars), 0);
    std::vector<int> current(static_cast<std::size_t>(n_vars), 0);
    for (int total = 1; total <= degree; ++total) enumerate(0, total, 0, current);
  }

  Index n_vars() const { return n_vars_; }
  int degree() const { return degree_; }
  int interaction() const { return interaction_; }
  Index size() const { return static_cast<Index>(exponents_.size()); }
  const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  Matrix evaluate(const Matrix& x) const {
    require(x.cols() == n_vars_, "PolynomialBasis: column count mismatch (expected " +
                                     std::to_string(n_vars_) + ", got " +
                                     std::to_string(x.cols()) + ")");
    Matrix out(x.rows(), size());
    for (Index c = 0; c < size(); ++c) {
      const auto& e = exponents_[static_cast<std::size_t>(c)];
      for (Index i = 0; i < x.rows(); ++i) {
        double v = 1.0;
        for (Index j = 0; j < n_vars_; ++j)
          for (int p = 0; p < e[static_cast<std::size_t>(j)]; ++p) v *= x(i, j);
        out(i, c) = v;
      }
    }
    return out;
  }

 private:
  void enumerate(Index var, int remaining, int used, std::vector<int>& current) {
    if (var == n_vars_ - 1) {
      if (remaining > 0 && used + 1 > interaction_) return;
      current[static_cast<std::size_t>(var)] = remaining;
      exponents_.push_back(current);
      current[static_cast<std::size_t>(var)] = 0;
      return;
    }
    for (int p = remaining; p >= 0; --p) {
      const int now_used = used + (p > 0 ? 1 : 0);
      if (now_used > interaction_) continue;
      current[static_cast<std::size_t>(var)] = p;
      enumerate(var + 1, remaining - p, now_used, current);
    }
    current[static_cast<std::size_t>(var)] = 0;
  }

  Index n_vars_ = 0;
  int degree_ = 0;
  int interaction_ = 0;
  std::vector<std::vector<int>> exponents_;
};

/// Column centering and scaling learned on one matrix and replayed on
/// others. Column 0 is treated as the intercept and left untouched;
/// zero-variance columns are centered only.
class ColumnStandardizer {
 public:
  ColumnStandardizer() = default;

  explicit ColumnStandardizer(const Matrix& m) : mean_(m.cols()), scale_(m.cols()) {
    const auto n = static_cast<double>(m.rows());
    mean_(0) = 0.0;
    scale_(0) = 1.0;
    for (Index c = 1; c < m.cols(); ++c) {
      const double mu = m.col(c).mean();
      const double var = (m.col(c).array() - mu).square().sum() / n;
      mean_(c) = mu;
      scale_(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }

  Matrix apply(const Matrix& m) const {
    require(m.cols() == mean_.size(), "ColumnStandardizer: column count mismatch");
    Matrix out = m;
    for (Index c = 1; c < m.cols(); ++c)
      out.col(c) = (m.col(c).array() - mean_(c)) / scale_(c);
    return out;
  }

  /// Maps coefficients fitted on standardized columns back to raw columns.
  Vector unscale(const Vector& coef) const {
    Vector raw = coef;
    for (Index c = 1; c < coef.size(); ++c) {
      raw(c) = coef(c) / scale_(c);
      raw(0) -= raw(c) * mean_(c);
    }
    return raw;
  }

  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }

 private:
  Vector mean_;
  Vector scale_;
};

}  // namespace boostiv
