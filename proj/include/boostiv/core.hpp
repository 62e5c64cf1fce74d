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

// Data containers, fold partitioning, seeded randomness, and the two
// linear-algebra primitives (least squares, projection) shared by every
// estimator in the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace boostiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Relative singular-value cutoff for every pseudo-inverse in the library.
inline constexpr double kPinvRtol = 1e-10;

inline void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

/// 64-bit seed. All draws in the library derive from one of these.
struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

/// SplitMix64 finalizer. Used to derive independent child seeds, e.g. one
/// per replication: derive(base, r) = splitmix64(base + (r + 1) * golden).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Seed derive_seed(Seed base, std::uint64_t stream) {
  return Seed{splitmix64(base.value + (stream + 1) * 0x9E3779B97F4A7C15ULL)};
}

/// Reproducible generator: std::mt19937_64 for the bit stream, with the
/// distributions implemented here rather than taken from <random>, whose
/// distribution algorithms are implementation-defined.
///
///   uniform()  -> top 53 bits / 2^53, in [0, 1)
///   below(n)   -> Lemire-style rejection on 64-bit draws
///   normal()   -> Marsaglia polar method, second variate cached
class Rng {
 public:
  explicit Rng(Seed seed) : engine_(seed.value) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the draw exactly uniform on {0..n-1}.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Outcome y, regressors X (n x d_x) and instruments Z (n x d_z).
class Dataset {
 public:
  Dataset() = default;

  Dataset(Vector y, Matrix x, Matrix z) : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)) {
    require(y_.size() >= 1, "Dataset: n must be >= 1");
    require(x_.rows() == y_.size() && z_.rows() == y_.size(),
            "Dataset: y, X, Z must have the same number of rows");
    require(x_.cols() >= 1 && z_.cols() >= 1, "Dataset: d_x and d_z must be >= 1");
    require(y_.allFinite() && x_.allFinite() && z_.allFinite(),
            "Dataset: entries must be finite");
  }

  Index n() const { return y_.size(); }
  Index dx() const { return x_.cols(); }
  Index dz() const { return z_.cols(); }

  const Vector& y() const { return y_; }
  const Matrix& x() const { return x_; }
  const Matrix& z() const { return z_; }

  Dataset subset(const std::vector<Index>& rows) const {
    Vector y(static_cast<Index>(rows.size()));
    Matrix x(y.size(), dx());
    Matrix z(y.size(), dz());
    for (Index i = 0; i < y.size(); ++i) {
      const Index r = rows[static_cast<std::size_t>(i)];
      y(i) = y_(r);
      x.row(i) = x_.row(r);
      z.row(i) = z_.row(r);
    }
    return Dataset(std::move(y), std::move(x), std::move(z));
  }

  /// Rows [begin, end).
  Dataset slice(Index begin, Index end) const {
    require(0 <= begin && begin < end && end <= n(), "Dataset::slice: bad range");
    const Index len = end - begin;
    return Dataset(y_.segment(begin, len), x_.middleRows(begin, len), z_.middleRows(begin, len));
  }

 private:
  Vector y_;
  Matrix x_;
  Matrix z_;
};

/// Fold label per observation. Built by partition().
class FoldAssignment {
 public:
  FoldAssignment(std::vector<int> fold_id, int k) : fold_id_(std::move(fold_id)), k_(k) {}

  int k() const { return k_; }
  Index n() const { return static_cast<Index>(fold_id_.size()); }
  const std::vector<int>& fold_id() const { return fold_id_; }

  std::vector<Index> in_fold(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold_id_.size(); ++i)
      if (fold_id_[i] == fold) out.push_back(static_cast<Index>(i));
    return out;
  }

  std::vector<Index> out_of_fold(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold_id_.size(); ++i)
      if (fold_id_[i] != fold) out.push_back(static_cast<Index>(i));
    return out;
  }

  std::vector<Index> sizes() const {
    std::vector<Index> s(static_cast<std::size_t>(k_), 0);
    for (int f : fold_id_) ++s[static_cast<std::size_t>(f)];
    return s;
  }

 private:
  std::vector<int> fold_id_;
  int k_;
};

/// Random K-fold split. The permutation is a Fisher-Yates shuffle driven by
/// Rng(seed); the first (n mod K) folds receive one extra observation.
inline FoldAssignment partition(Index n, int k, Seed seed) {
  require(k >= 2, "partition: K must be >= 2");
  require(static_cast<Index>(k) <= n, "partition: K must be <= n");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold_id(static_cast<std::size_t>(n));
  const Index base = n / k;
  const Index extra = n % k;
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    for (Index j = 0; j < size; ++j) fold_id[static_cast<std::size_t>(perm[pos++])] = f;
  }
  return FoldAssignment(std::move(fold_id), k);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// Minimum-norm solution of min ||b - A c||^2. Singular values below
/// kPinvRtol * sigma_max are treated as zero.
inline Vector least_squares(const Matrix& a, const Vector& b) {
  require(a.rows() >= 1 && a.cols() >= 1, "least_squares: A must be non-empty");
  require(a.rows() == b.size(), "least_squares: row count of A must equal length of b");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kPinvRtol);
  return svd.solve(b);
}

/// Multi-right-hand-side overload; column j of the result solves for b.col(j).
inline Matrix least_squares(const Matrix& a, const Matrix& b) {
  require(a.rows() >= 1 && a.cols() >= 1, "least_squares: A must be non-empty");
  require(a.rows() == b.rows(), "least_squares: row count of A must equal rows of B");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kPinvRtol);
  return svd.solve(b);
}

/// P_H v, computed as H * least_squares(H, v). Never forms the n x n matrix.
inline Vector project(const Matrix& h, const Vector& v) {
  require(h.rows() == v.size(), "project: H must have as many rows as v");
  return h * least_squares(h, v);
}

/// Orthonormal basis U of the column span of H, so that P_H = U U'.
/// Used where the same projection is applied many times.
class ProjectionBasis {
 public:
  explicit ProjectionBasis(const Matrix& h) {
    require(h.rows() >= 1 && h.cols() >= 1, "ProjectionBasis: H must be non-empty");
    Eigen::JacobiSVD<Matrix> svd(h, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    if (sv.size() > 0 && sv(0) > 0.0) {
      const double cut = kPinvRtol * sv(0);
      while (rank < sv.size() && sv(rank) > cut) ++rank;
    }
    u_ = svd.matrixU().leftCols(rank);
  }

  Index rank() const { return u_.cols(); }
  Index rows() const { return u_.rows(); }
  const Matrix& u() const { return u_; }

  Vector coordinates(const Vector& v) const { return u_.transpose() * v; }
  Vector apply(const Vector& v) const { return u_ * coordinates(v); }

 private:
  Matrix u_;
};

inline double mean(const Vector& v) { return v.size() == 0 ? 0.0 : v.mean(); }

inline double variance(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

template <typename T>
Matrix select_rows(const Matrix& m, const std::vector<T>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

template <typename T>
Vector select_rows(const Vector& v, const std::vector<T>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

}  // namespace boostiv
