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

// Monte Carlo designs.
//
// Univariate:
//   y = g(x) + rho e + delta,  x = z1 + z2 + e + gamma,
//   z_j ~ U[-3, 3], e ~ N(0, 1), delta, gamma ~ N(0, 0.1)  (variance 0.1).
//
// Multivariate:
//   y = h(x) + eps,  x_k = g_k(z) + v_k,  z ~ N(0, I),
//   eps ~ N(0, 1),   v_k = rho eps + sqrt(1 - rho^2) xi_k.
//   Design 1: h(x) = exp(-x'x / 2).  Design 2: h(x) = sum_k sin(10 x_k).
//   Linear first stage g(z) = z' Pi with Pi_jk ~ N(0, 1 / d_z); nonlinear
//   g_k(z) = N(z; theta_k, I) density with theta_k ~ U[-1, 1]^{d_z}.
//   Pi and theta are drawn once per seed, before the observations.

#include <cmath>
#include <numbers>
#include <cstdio>
#include <ostream>
#include <string>

#include "boostiv/core.hpp"

namespace boostiv {

enum class StructuralFunction { kAbs, kLog, kSin, kStep };

inline std::string to_string(StructuralFunction g) {
  switch (g) {
    case StructuralFunction::kAbs: return "abs";
    case StructuralFunction::kLog: return "log";
    case StructuralFunction::kSin: return "sin";
    case StructuralFunction::kStep: return "step";
  }
  return "?";
}

inline StructuralFunction parse_structural_function(const std::string& name) {
  if (name == "abs") return StructuralFunction::kAbs;
  if (name == "log") return StructuralFunction::kLog;
  if (name == "sin") return StructuralFunction::kSin;
  if (name == "step") return StructuralFunction::kStep;
  throw std::invalid_argument("unknown structural function '" + name + "' (expected abs, log, sin or step)");
}

inline double sign(double v) { return static_cast<double>((0.0 < v) - (v < 0.0)); }

inline double structural_g(StructuralFunction g, double x) {
  switch (g) {
    case StructuralFunction::kAbs: return std::abs(x);
    case StructuralFunction::kLog: return std::log(std::abs(16.0 * x - 8.0) + 1.0) * sign(x - 0.5);
    case StructuralFunction::kSin: return std::sin(x);
    case StructuralFunction::kStep: return x < 0.0 ? 1.0 : 2.5;
  }
  return 0.0;
}

struct UnivariateSpec {
  StructuralFunction g = StructuralFunction::kAbs;
  double rho = 0.5;
  Index n = 1000;
  Index n_test = 1000;

  void validate() const {
    require(n >= 1, "UnivariateSpec: n must be >= 1");
    require(n_test >= 1, "UnivariateSpec: n_test must be >= 1");
    require(std::isfinite(rho), "UnivariateSpec: rho must be finite");
  }
};

enum class IvType { kLinear, kNonlinear };

inline std::string to_string(IvType t) { return t == IvType::kLinear ? "linear" : "nonlinear"; }

struct MultivariateSpec {
  int design = 1;
  IvType iv_type = IvType::kLinear;
  Index dx = 5;
  Index dz = 7;
  double rho = 0.25;
  Index n = 1000;
  Index n_test = 500;

  void validate() const {
    require(design == 1 || design == 2, "MultivariateSpec: design must be 1 or 2");
    require(dx >= 1, "MultivariateSpec: d_x must be >= 1");
    require(dz >= dx, "MultivariateSpec: d_z must be >= d_x");
    require(std::abs(rho) < 1.0, "MultivariateSpec: |rho| < 1 required");
    require(n >= 1 && n_test >= 1, "MultivariateSpec: sample sizes must be >= 1");
  }
};

/// Training data plus noiseless structural values on train and test.
struct SimulatedDraw {
  Dataset data;
  Vector g_true_train;
  Matrix test_x;
  Matrix test_z;
  Vector g_true_test;
  /// Multivariate only: first-stage parameters (Pi is d_z x d_x, theta is d_x x d_z).
  Matrix pi;
  Matrix theta;
};

namespace detail {

inline constexpr double kUnivariateNoiseSd = 0.31622776601683794;  // sqrt(0.1)

inline void fill_univariate(const UnivariateSpec& spec, Rng& rng, Index n, Vector& y, Matrix& x, Matrix& z,
                            Vector& g) {
  y.resize(n);
  x.resize(n, 1);
  z.resize(n, 2);
  g.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double z1 = rng.uniform(-3.0, 3.0);
    const double z2 = rng.uniform(-3.0, 3.0);
    const double e = rng.normal();
    const double gamma = rng.normal(0.0, kUnivariateNoiseSd);
    const double delta = rng.normal(0.0, kUnivariateNoiseSd);
    const double xi = z1 + z2 + e + gamma;
    z(i, 0) = z1;
    z(i, 1) = z2;
    x(i, 0) = xi;
    g(i) = structural_g(spec.g, xi);
    y(i) = g(i) + spec.rho * e + delta;
  }
}

}  // namespace detail

inline SimulatedDraw gen_univariate(const UnivariateSpec& spec, Seed seed) {
  spec.validate();
  Rng rng(seed);
  SimulatedDraw d;
  Vector y, ty;
  Matrix x, z;
  detail::fill_univariate(spec, rng, spec.n, y, x, z, d.g_true_train);
  detail::fill_univariate(spec, rng, spec.n_test, ty, d.test_x, d.test_z, d.g_true_test);
  d.data = Dataset(std::move(y), std::move(x), std::move(z));
  return d;
}

inline double multivariate_h(int design, const Eigen::Ref<const Vector>& x) {
  if (design == 1) return std::exp(-0.5 * x.squaredNorm());
  double s = 0.0;
  for (Index k = 0; k < x.size(); ++k) s += std::sin(10.0 * x(k));
  return s;
}

namespace detail {

inline void fill_multivariate(const MultivariateSpec& spec, const Matrix& pi, const Matrix& theta, Rng& rng,
                              Index n, Vector& y, Matrix& x, Matrix& z, Vector& g) {
  const double density_norm = std::pow(2.0 * std::numbers::pi, -0.5 * static_cast<double>(spec.dz));
  const double v_sd = std::sqrt(1.0 - spec.rho * spec.rho);
  y.resize(n);
  x.resize(n, spec.dx);
  z.resize(n, spec.dz);
  g.resize(n);
  Vector zi(spec.dz);
  Vector xi(spec.dx);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < spec.dz; ++j) zi(j) = rng.normal();
    const double eps = rng.normal();
    for (Index k = 0; k < spec.dx; ++k) {
      const double first_stage = spec.iv_type == IvType::kLinear
                                     ? zi.dot(pi.col(k))
                                     : density_norm * std::exp(-0.5 * (zi - theta.row(k).transpose()).squaredNorm());
      xi(k) = first_stage + spec.rho * eps + v_sd * rng.normal();
    }
    z.row(i) = zi.transpose();
    x.row(i) = xi.transpose();
    g(i) = multivariate_h(spec.design, xi);
    y(i) = g(i) + eps;
  }
}

}  // namespace detail

inline SimulatedDraw gen_multivariate(const MultivariateSpec& spec, Seed seed) {
  spec.validate();
  Rng rng(seed);
  SimulatedDraw d;
  d.pi.resize(spec.dz, spec.dx);
  const double pi_sd = 1.0 / std::sqrt(static_cast<double>(spec.dz));
  for (Index k = 0; k < spec.dx; ++k)
    for (Index j = 0; j < spec.dz; ++j) d.pi(j, k) = rng.normal(0.0, pi_sd);
  d.theta.resize(spec.dx, spec.dz);
  for (Index k = 0; k < spec.dx; ++k)
    for (Index j = 0; j < spec.dz; ++j) d.theta(k, j) = rng.uniform(-1.0, 1.0);
  Vector y, ty;
  Matrix x, z;
  detail::fill_multivariate(spec, d.pi, d.theta, rng, spec.n, y, x, z, d.g_true_train);
  detail::fill_multivariate(spec, d.pi, d.theta, rng, spec.n_test, ty, d.test_x, d.test_z, d.g_true_test);
  d.data = Dataset(std::move(y), std::move(x), std::move(z));
  return d;
}

/// Mean squared difference against the noiseless structural values.
inline double mse(const Vector& pred, const Vector& truth) {
  require(pred.size() == truth.size(), "mse: length mismatch");
  require(pred.size() >= 1, "mse: empty input");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

/// mean(pred - truth)
inline double bias(const Vector& pred, const Vector& truth) {
  require(pred.size() == truth.size(), "bias: length mismatch");
  require(pred.size() >= 1, "bias: empty input");
  return (pred - truth).mean();
}

/// Training rows as CSV: y, x_1..x_dx, z_1..z_dz, g_true.
inline void write_dataset_csv(std::ostream& os, const Dataset& data, const Vector& g_true) {
  require(g_true.size() == data.n(), "write_dataset_csv: g_true length mismatch");
  os << "y";
  for (Index j = 0; j < data.dx(); ++j) os << ",x_" << j + 1;
  for (Index j = 0; j < data.dz(); ++j) os << ",z_" << j + 1;
  os << ",g_true\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (Index i = 0; i < data.n(); ++i) {
    put(data.y()(i));
    for (Index j = 0; j < data.dx(); ++j) {
      os << ',';
      put(data.x()(i, j));
    }
    for (Index j = 0; j < data.dz(); ++j) {
      os << ',';
      put(data.z()(i, j));
    }
    os << ',';
    put(g_true(i));
    os << '\n';
  }
}

}  // namespace boostiv
