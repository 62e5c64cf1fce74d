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

// Series (sieve) NPIV two-stage least squares with polynomial bases:
//   P_hat = Q (Q'Q)^- Q' P,   gamma = (P_hat' P_hat)^- P_hat' y,
// where P = p^L(x) is the structural basis and Q = q^K(z) the IV basis.

#include <string>

#include "boostiv/core.hpp"
#include "boostiv/polynomial.hpp"

namespace boostiv {

struct SieveSpec {
  int basis_degree = 3;
  int iv_degree = 4;
  /// Cap on distinct variables per monomial; 0 means no cap beyond degree.
  int interaction = 0;

  void validate() const {
    require(basis_degree >= 1, "SieveSpec: basis_degree must be >= 1");
    require(iv_degree >= basis_degree, "SieveSpec: iv_degree must be >= basis_degree");
    require(interaction >= 0, "SieveSpec: interaction must be >= 0");
  }
};

/// IV degree one above the structural degree when there are more
/// instruments than regressors, equal otherwise.
inline SieveSpec default_sieve_spec(Index dx, Index dz, int degree = 3) {
  SieveSpec s;
  s.basis_degree = degree;
  s.iv_degree = dz > dx ? degree + 1 : degree;
  return s;
}

/// Intercept plus monomials of total degree <= degree (see PolynomialBasis
/// for column order). Throws if the design would have more than
/// max_columns columns.
inline Matrix polynomial_basis(const Matrix& x, int degree, int interaction = 0,
                               Index max_columns = -1) {
  const PolynomialBasis basis(x.cols(), degree, interaction);
  if (max_columns >= 0)
    require(basis.size() <= max_columns, "polynomial_basis: " + std::to_string(basis.size()) +
                                             " columns exceed the limit of " + std::to_string(max_columns));
  return basis.evaluate(x);
}

struct NPIVModel {
  Vector gamma;
  SieveSpec spec;
  PolynomialBasis basis;
};

inline NPIVModel npiv_fit(const Dataset& data, const SieveSpec& spec) {
  spec.validate();
  const PolynomialBasis pbasis(data.dx(), spec.basis_degree, spec.interaction);
  const PolynomialBasis qbasis(data.dz(), spec.iv_degree, spec.interaction);
  require(pbasis.size() <= data.n(), "npiv_fit: structural basis has " + std::to_string(pbasis.size()) +
                                         " columns but only " + std::to_string(data.n()) + " observations");
  require(qbasis.size() <= data.n(), "npiv_fit: IV basis has " + std::to_string(qbasis.size()) +
                                         " columns but only " + std::to_string(data.n()) + " observations");

  const Matrix p_raw = pbasis.evaluate(data.x());
  const Matrix q_raw = qbasis.evaluate(data.z());
  const ColumnStandardizer pscale(p_raw);
  const ColumnStandardizer qscale(q_raw);
  const Matrix p = pscale.apply(p_raw);
  const Matrix q = qscale.apply(q_raw);

  const ProjectionBasis iv(q);
  require(iv.rank() >= 1, "npiv_fit: IV design has rank 0");
  const Matrix p_hat = iv.u() * (iv.u().transpose() * p);
  const Vector gamma_std = least_squares(p_hat, data.y());
  return NPIVModel{pscale.unscale(gamma_std), spec, pbasis};
}

inline Vector npiv_predict(const NPIVModel& model, const Matrix& x) {
  require(x.cols() == model.basis.n_vars(), "npiv_predict: regressor column count mismatch");
  return model.basis.evaluate(x) * model.gamma;
}

}  // namespace boostiv
