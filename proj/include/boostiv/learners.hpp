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

// Weak learners. The second stage uses depth-one regression stumps whose
// two leaves are fitted against the instrument projection of their
// indicator columns; the first stage learns the instrument matrix H(z).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "boostiv/core.hpp"
#include "boostiv/polynomial.hpp"

namespace boostiv {

// ---------------------------------------------------------------------------
// Stumps
// ---------------------------------------------------------------------------

/// phi(x) = leaf_left if x[feature] <= threshold, else leaf_right.
struct StumpBasis {
  Index feature = 0;
  double threshold = 0.0;
  double leaf_left = 0.0;
  double leaf_right = 0.0;

  double operator()(double value) const { return value <= threshold ? leaf_left : leaf_right; }

  friend bool operator==(const StumpBasis&, const StumpBasis&) = default;
};

inline Vector predict_stump(const StumpBasis& b, const Matrix& x) {
  require(b.feature >= 0 && b.feature < x.cols(), "predict_stump: feature index out of range");
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = b(x(i, b.feature));
  return out;
}

/// out += scale * phi(X)
inline void accumulate_stump(const StumpBasis& b, const Matrix& x, double scale, Vector& out) {
  require(b.feature >= 0 && b.feature < x.cols(), "accumulate_stump: feature index out of range");
  for (Index i = 0; i < x.rows(); ++i) out(i) += scale * b(x(i, b.feature));
}

/// Upper bound on split candidates per feature.
inline constexpr std::size_t kMaxThresholds = 255;

namespace detail {

// Strictly between a and b (a < b), never equal to b, so that the
// "x <= threshold goes left" rule splits exactly between them.
inline double midpoint(double a, double b) {
  double m = a + 0.5 * (b - a);
  if (!(m < b)) m = a;
  return m;
}

}  // namespace detail

/// Candidate thresholds for one column: midpoints of consecutive sorted
/// distinct values. With more than max_count gaps, the gaps at the
/// quantile positions k * gaps / (max_count + 1) are kept.
inline std::vector<double> candidate_thresholds(const Vector& column, std::size_t max_count = kMaxThresholds) {
  require(max_count >= 1, "candidate_thresholds: max_count must be >= 1");
  std::vector<double> values(column.data(), column.data() + column.size());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> out;
  if (values.size() < 2) return out;
  const std::size_t gaps = values.size() - 1;
  if (gaps <= max_count) {
    out.reserve(gaps);
    for (std::size_t g = 0; g < gaps; ++g) out.push_back(detail::midpoint(values[g], values[g + 1]));
    return out;
  }
  out.reserve(max_count);
  for (std::size_t k = 1; k <= max_count; ++k) {
    const std::size_t g = std::min(gaps - 1, k * gaps / (max_count + 1));
    const double t = detail::midpoint(values[g], values[g + 1]);
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

/// Candidate thresholds for every column of X.
inline std::vector<std::vector<double>> candidate_thresholds(const Matrix& x,
                                                             std::size_t max_count = kMaxThresholds) {
  std::vector<std::vector<double>> out;
  for (Index j = 0; j < x.cols(); ++j) out.push_back(candidate_thresholds(Vector(x.col(j)), max_count));
  return out;
}

/// Per-feature sort order and split candidates for a fixed regressor
/// matrix. For candidate c of feature j, the rows order[j][0..cut[j][c])
/// fall left of threshold[j][c]. Candidates default to those of X itself;
/// an explicit list lets several row subsets share one grid.
class SortedFeatures {
 public:
  SortedFeatures() = default;

  explicit SortedFeatures(const Matrix& x, std::size_t max_count = kMaxThresholds)
      : SortedFeatures(x, candidate_thresholds(x, max_count)) {}

  SortedFeatures(const Matrix& x, std::vector<std::vector<double>> thresholds) : n_(x.rows()) {
    require(x.rows() >= 1 && x.cols() >= 1, "SortedFeatures: X must be non-empty");
    require(static_cast<Index>(thresholds.size()) == x.cols(), "SortedFeatures: one threshold list per column");
    const auto d = static_cast<std::size_t>(x.cols());
    thresholds_ = std::move(thresholds);
    order_.resize(d);
    cuts_.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const Vector col = x.col(static_cast<Index>(j));
      auto& ord = order_[j];
      ord.resize(static_cast<std::size_t>(n_));
      std::iota(ord.begin(), ord.end(), Index{0});
      std::stable_sort(ord.begin(), ord.end(), [&](Index a, Index b) { return col(a) < col(b); });
      auto& cut = cuts_[j];
      cut.reserve(thresholds_[j].size());
      std::size_t pos = 0;
      for (double t : thresholds_[j]) {
        while (pos < ord.size() && col(ord[pos]) <= t) ++pos;
        cut.push_back(static_cast<Index>(pos));
      }
    }
  }

  Index n() const { return n_; }
  Index features() const { return static_cast<Index>(order_.size()); }
  const std::vector<Index>& order(Index j) const { return order_[static_cast<std::size_t>(j)]; }
  const std::vector<double>& thresholds(Index j) const { return thresholds_[static_cast<std::size_t>(j)]; }
  const std::vector<Index>& cuts(Index j) const { return cuts_[static_cast<std::size_t>(j)]; }

 private:
  Index n_ = 0;
  std::vector<std::vector<Index>> order_;
  std::vector<std::vector<double>> thresholds_;
  std::vector<std::vector<Index>> cuts_;
};

struct StumpFit {
  StumpBasis stump;
  double loss = 0.0;
};

namespace detail {

// Minimum-norm solve of the symmetric 2x2 system [a b; b c] x = rhs.
// Eigenvalues at or below kGramRtol * lambda_max are dropped; the Gram
// entries come from running sums, so the cutoff is looser than kPinvRtol.
inline constexpr double kGramRtol = 1e-9;

inline std::pair<double, double> solve_gram2(double a, double b, double c, double r0, double r1) {
  const double tr = 0.5 * (a + c);
  const double diff = 0.5 * (a - c);
  const double rad = std::sqrt(diff * diff + b * b);
  const double l1 = tr + rad;
  const double l2 = tr - rad;
  if (!(l1 > 0.0)) return {0.0, 0.0};
  // Unit eigenvector for l1.
  double v0, v1;
  if (std::abs(b) > 0.0) {
    v0 = l1 - c;
    v1 = b;
    if (std::abs(a - l1) > std::abs(v0)) {
      v0 = b;
      v1 = l1 - a;
    }
  } else {
    v0 = a >= c ? 1.0 : 0.0;
    v1 = a >= c ? 0.0 : 1.0;
  }
  const double norm = std::hypot(v0, v1);
  v0 /= norm;
  v1 /= norm;
  const double w0 = -v1;
  const double w1 = v0;
  double x0 = 0.0, x1 = 0.0;
  const double p1 = (v0 * r0 + v1 * r1) / l1;
  x0 += p1 * v0;
  x1 += p1 * v1;
  if (l2 > kGramRtol * l1) {
    const double p2 = (w0 * r0 + w1 * r1) / l2;
    x0 += p2 * w0;
    x1 += p2 * w1;
  }
  return {x0, x1};
}

}  // namespace detail

/// Exhaustive projected stump search for a fixed (X, H).
///
/// For every feature and candidate threshold, solves
///   min_{cL, cR} || r - cL P_H u_L - cR P_H u_R ||^2
/// where u_L, u_R are the left/right indicator columns. With U an
/// orthonormal basis of span(H), every inner product reduces to running
/// sums over the sorted rows:
///   <P u_L, P u_L> = ||U' u_L||^2,   <r, P u_L> = sum_{left} (P r)_i,
/// so the split-dependent Gram entries are computed once at construction
/// and each fit() costs O(n rank(H) + candidates).
///
/// Ties on the objective go to the lowest feature, then lowest threshold.
class ProjectedStumpFitter {
 public:
  ProjectedStumpFitter(const SortedFeatures& sorted, const Matrix& h) : basis_(h) {
    require(h.rows() == sorted.n(), "fit_stump_projected: H must have one row per observation");
    require(sorted.n() >= 2, "fit_stump_projected: need at least two observations");
    require(basis_.rank() >= 1, "fit_stump_projected: H has rank 0");
    sorted_ = &sorted;
    const Matrix& u = basis_.u();
    const Vector total = u.colwise().sum().transpose();
    gram_.resize(static_cast<std::size_t>(sorted.features()));
    for (Index j = 0; j < sorted.features(); ++j) {
      const auto& ord = sorted.order(j);
      const auto& cuts = sorted.cuts(j);
      auto& g = gram_[static_cast<std::size_t>(j)];
      g.resize(cuts.size());
      Vector left = Vector::Zero(u.cols());
      std::size_t pos = 0;
      for (std::size_t c = 0; c < cuts.size(); ++c) {
        while (static_cast<Index>(pos) < cuts[c]) left += u.row(ord[pos++]).transpose();
        const Vector right = total - left;
        g[c] = {left.squaredNorm(), left.dot(right), right.squaredNorm()};
      }
    }
  }

  Index rank() const { return basis_.rank(); }

  /// Best stump for residual r. leaf_cap > 0 clamps both leaves to
  /// [-leaf_cap, leaf_cap] before the loss is evaluated.
  StumpFit fit(const Vector& r, double leaf_cap = 0.0) const {
    require(r.size() == sorted_->n(), "fit_stump_projected: residual length mismatch");
    const Vector pr = basis_.apply(r);
    const double rr = r.squaredNorm();
    const double pr_total = pr.sum();

    StumpFit best;
    best.loss = rr;
    bool found = false;
    double best_gain = 0.0;
    for (Index j = 0; j < sorted_->features(); ++j) {
      const auto& ord = sorted_->order(j);
      const auto& cuts = sorted_->cuts(j);
      const auto& thr = sorted_->thresholds(j);
      const auto& g = gram_[static_cast<std::size_t>(j)];
      double left_sum = 0.0;
      std::size_t pos = 0;
      for (std::size_t c = 0; c < cuts.size(); ++c) {
        while (static_cast<Index>(pos) < cuts[c]) left_sum += pr(ord[pos++]);
        const double bl = left_sum;
        const double br = pr_total - left_sum;
        auto [cl, cr] = detail::solve_gram2(g[c].ll, g[c].lr, g[c].rr, bl, br);
        if (leaf_cap > 0.0) {
          cl = std::clamp(cl, -leaf_cap, leaf_cap);
          cr = std::clamp(cr, -leaf_cap, leaf_cap);
        }
        // rr - loss
        const double gain = 2.0 * (cl * bl + cr * br) -
                            (cl * cl * g[c].ll + 2.0 * cl * cr * g[c].lr + cr * cr * g[c].rr);
        if (!found || gain > best_gain) {
          found = true;
          best_gain = gain;
          best.stump = StumpBasis{j, thr[c], cl, cr};
        }
      }
    }
    if (!found) {
      // Every feature is constant: only the zero stump is available.
      best.stump = StumpBasis{0, 0.0, 0.0, 0.0};
      return best;
    }
    best.loss = std::max(0.0, rr - best_gain);
    if (best_gain <= 0.0) {
      best.stump.leaf_left = 0.0;
      best.stump.leaf_right = 0.0;
      best.loss = rr;
    }
    return best;
  }

 private:
  struct Gram {
    double ll, lr, rr;
  };
  ProjectionBasis basis_;
  const SortedFeatures* sorted_ = nullptr;
  std::vector<std::vector<Gram>> gram_;
};

/// One-shot projected stump fit.
inline StumpFit fit_stump_projected(const Vector& r, const Matrix& x, const Matrix& h) {
  require(r.size() == x.rows(), "fit_stump_projected: residual length must match X rows");
  require(h.rows() == x.rows(), "fit_stump_projected: H must have one row per observation");
  require(x.rows() >= 2, "fit_stump_projected: need at least two observations");
  const SortedFeatures sorted(x);
  const ProjectedStumpFitter fitter(sorted, h);
  return fitter.fit(r);
}

/// Ordinary least-squares stump (no projection): leaves are the left and
/// right means of r. Same candidates and tie rule as the projected search.
inline StumpFit fit_stump_ls(const Vector& r, const SortedFeatures& sorted) {
  require(r.size() == sorted.n(), "fit_stump_ls: residual length mismatch");
  const double total = r.sum();
  const double rr = r.squaredNorm();
  const auto n = sorted.n();
  StumpFit best;
  best.loss = rr;
  bool found = false;
  double best_gain = 0.0;
  for (Index j = 0; j < sorted.features(); ++j) {
    const auto& ord = sorted.order(j);
    const auto& cuts = sorted.cuts(j);
    const auto& thr = sorted.thresholds(j);
    double left_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      while (static_cast<Index>(pos) < cuts[c]) left_sum += r(ord[pos++]);
      const auto nl = static_cast<double>(cuts[c]);
      const auto nr = static_cast<double>(n - cuts[c]);
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
      if (!found || gain > best_gain) {
        found = true;
        best_gain = gain;
        best.stump = StumpBasis{j, thr[c], left_sum / nl, right_sum / nr};
      }
    }
  }
  if (found) best.loss = std::max(0.0, rr - best_gain);
  return best;
}

// ---------------------------------------------------------------------------
// Instrument learners
// ---------------------------------------------------------------------------

enum class InstrumentMode { kLinearSieve, kBoostedStumps };

/// What the first stage predicts from Z.
///   kReducedForm   - each column of X
///   kPreviousBasis - the previous iteration's stump phi_{m-1}(x)
///   kSieve         - nothing: H is the polynomial sieve of Z itself
enum class InstrumentTarget { kReducedForm, kPreviousBasis, kSieve };

/// Largest sieve degree (capped at 12) whose polynomial basis in dz
/// variables keeps at least five rows per column.
inline int auto_sieve_degree(Index dz, Index n_rows) {
  int best = 1;
  for (int d = 2; d <= 12; ++d) {
    if (PolynomialBasis(dz, d).size() * 5 > n_rows) break;
    best = d;
  }
  return best;
}

struct InstrumentLearnerSpec {
  InstrumentMode mode = InstrumentMode::kLinearSieve;
  /// Sieve degree; 0 picks auto_sieve_degree from the fitting rows.
  int degree = 0;
  int interaction = 0;  // 0: no cap beyond degree
  int n_rounds = 200;
  int depth = 1;
  double learning_rate = 0.1;
  InstrumentTarget target = InstrumentTarget::kSieve;
  /// Each fitted predictor enters H through its powers 1..expansion.
  int expansion = 1;

  void validate() const {
    require(expansion >= 1, "InstrumentLearnerSpec: expansion must be >= 1");
    require(degree >= 0, "InstrumentLearnerSpec: degree must be >= 0 (0 = automatic)");
    require(interaction >= 0, "InstrumentLearnerSpec: interaction must be >= 0");
    require(n_rounds >= 1, "InstrumentLearnerSpec: n_rounds must be >= 1");
    require(depth == 1, "InstrumentLearnerSpec: only depth-1 stumps are supported");
    require(learning_rate > 0.0 && learning_rate <= 1.0,
            "InstrumentLearnerSpec: learning_rate must be in (0, 1]");
    require(!(target == InstrumentTarget::kSieve && mode != InstrumentMode::kLinearSieve),
            "InstrumentLearnerSpec: sieve target requires linear-sieve mode");
  }
};

inline std::string to_string(InstrumentMode m) {
  return m == InstrumentMode::kLinearSieve ? "linear-sieve" : "boosted-stumps";
}

inline std::string to_string(InstrumentTarget t) {
  switch (t) {
    case InstrumentTarget::kReducedForm: return "reduced-form";
    case InstrumentTarget::kPreviousBasis: return "previous-basis";
    case InstrumentTarget::kSieve: return "sieve";
  }
  return "?";
}

/// Learned IV matrix. Column 0 is all ones.
struct InstrumentFeatures {
  Matrix h;

  Index q() const { return h.cols(); }
};

/// A fitted first stage (eta-hat): maps instruments to p predictors.
class InstrumentTransform {
 public:
  /// Predicts nothing; instrument_features() yields the intercept column.
  static InstrumentTransform constant(Index dz) {
    InstrumentTransform t;
    t.dz_ = dz;
    t.kind_ = Kind::kConstant;
    return t;
  }

  static InstrumentTransform fit(const Matrix& z, const Matrix& targets, const InstrumentLearnerSpec& spec) {
    spec.validate();
    require(z.rows() >= 1 && z.cols() >= 1, "fit_instrument_learner: empty training set");
    InstrumentTransform t;
    t.dz_ = z.cols();
    t.spec_ = spec;
    if (spec.mode == InstrumentMode::kLinearSieve) {
      t.z_scale_ = ZScale(z);
      const int degree = spec.degree > 0 ? spec.degree : auto_sieve_degree(z.cols(), z.rows());
      t.basis_ = PolynomialBasis(z.cols(), degree, spec.interaction);
      const Matrix raw = t.basis_.evaluate(t.z_scale_.apply(z));
      t.basis_scale_ = ColumnStandardizer(raw);
      const Matrix design = t.basis_scale_.apply(raw);
      if (spec.target == InstrumentTarget::kSieve) {
        t.kind_ = Kind::kSieve;
        return t;
      }
      require(targets.rows() == z.rows(), "fit_instrument_learner: targets must have one row per instrument row");
      require(targets.cols() >= 1, "fit_instrument_learner: need at least one target");
      t.kind_ = Kind::kLinear;
      t.coef_ = least_squares(design, targets);
      t.record_output_scale(z);
      return t;
    }
    require(targets.rows() == z.rows(), "fit_instrument_learner: targets must have one row per instrument row");
    require(targets.cols() >= 1, "fit_instrument_learner: need at least one target");
    t.kind_ = Kind::kBoosted;
    const SortedFeatures sorted(z);
    for (Index c = 0; c < targets.cols(); ++c) {
      BoostedTarget bt;
      const Vector y = targets.col(c);
      bt.intercept = y.mean();
      Vector r = y.array() - bt.intercept;
      for (int m = 0; m < spec.n_rounds; ++m) {
        if (z.rows() < 2) break;
        StumpFit s = fit_stump_ls(r, sorted);
        s.stump.leaf_left *= spec.learning_rate;
        s.stump.leaf_right *= spec.learning_rate;
        for (Index i = 0; i < z.rows(); ++i) r(i) -= s.stump(z(i, s.stump.feature));
        bt.stumps.push_back(s.stump);
      }
      t.boosted_.push_back(std::move(bt));
    }
    t.record_output_scale(z);
    return t;
  }

  Index dz() const { return dz_; }
  const InstrumentLearnerSpec& spec() const { return spec_; }

  /// Number of predictor columns p.
  Index outputs() const {
    switch (kind_) {
      case Kind::kConstant: return 0;
      case Kind::kSieve: return basis_.size() - 1;
      case Kind::kLinear: return coef_.cols();
      case Kind::kBoosted: return static_cast<Index>(boosted_.size());
    }
    return 0;
  }

  /// n x p matrix of fitted predictors g_j(Z).
  Matrix predict(const Matrix& z) const {
    require(z.cols() == dz_, "instrument_features: instrument column count mismatch (expected " +
                                 std::to_string(dz_) + ", got " + std::to_string(z.cols()) + ")");
    switch (kind_) {
      case Kind::kConstant: return Matrix(z.rows(), 0);
      case Kind::kSieve: {
        const Matrix design = basis_scale_.apply(basis_.evaluate(z_scale_.apply(z)));
        return design.rightCols(design.cols() - 1);
      }
      case Kind::kLinear: return basis_scale_.apply(basis_.evaluate(z_scale_.apply(z))) * coef_;
      case Kind::kBoosted: {
        Matrix out(z.rows(), static_cast<Index>(boosted_.size()));
        for (std::size_t c = 0; c < boosted_.size(); ++c) {
          Vector col = Vector::Constant(z.rows(), boosted_[c].intercept);
          for (const auto& s : boosted_[c].stumps) accumulate_stump(s, z, 1.0, col);
          out.col(static_cast<Index>(c)) = col;
        }
        return out;
      }
    }
    return {};
  }

  /// H = [1, g_1(Z), ..., g_p(Z)], or with expansion e > 1 the powers
  /// s_j, s_j^2, ..., s_j^e of each standardized predictor s_j.
  InstrumentFeatures features(const Matrix& z) const {
    const Matrix g = predict(z);
    const int e = (kind_ == Kind::kLinear || kind_ == Kind::kBoosted) ? spec_.expansion : 1;
    InstrumentFeatures f;
    f.h.resize(z.rows(), 1 + g.cols() * e);
    f.h.col(0).setOnes();
    if (e == 1) {
      f.h.rightCols(g.cols()) = g;
      return f;
    }
    Index col = 1;
    for (Index j = 0; j < g.cols(); ++j) {
      const Vector s = (g.col(j).array() - out_mean_(j)) / out_scale_(j);
      Vector pw = Vector::Ones(z.rows());
      for (int p = 1; p <= e; ++p) {
        pw = pw.cwiseProduct(s);
        f.h.col(col++) = pw;
      }
    }
    return f;
  }

 private:
  enum class Kind { kConstant, kSieve, kLinear, kBoosted };

  // Per-column centering/scaling of raw instruments before the monomials.
  struct ZScale {
    ZScale() = default;
    explicit ZScale(const Matrix& z) : mean(z.colwise().mean().transpose()), scale(z.cols()) {
      for (Index c = 0; c < z.cols(); ++c) {
        const double var = (z.col(c).array() - mean(c)).square().mean();
        scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
      }
    }
    Matrix apply(const Matrix& z) const {
      Matrix out = z;
      for (Index c = 0; c < z.cols(); ++c) out.col(c) = (z.col(c).array() - mean(c)) / scale(c);
      return out;
    }
    Vector mean;
    Vector scale;
  };

  struct BoostedTarget {
    double intercept = 0.0;
    std::vector<StumpBasis> stumps;
  };

  void record_output_scale(const Matrix& z) {
    const Matrix g = predict(z);
    out_mean_ = g.colwise().mean().transpose();
    out_scale_.resize(g.cols());
    for (Index c = 0; c < g.cols(); ++c) {
      const double var = (g.col(c).array() - out_mean_(c)).square().mean();
      out_scale_(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  }

  Kind kind_ = Kind::kConstant;
  Index dz_ = 0;
  InstrumentLearnerSpec spec_;
  ZScale z_scale_;
  PolynomialBasis basis_;
  ColumnStandardizer basis_scale_;
  Matrix coef_;
  std::vector<BoostedTarget> boosted_;
  Vector out_mean_;
  Vector out_scale_;
};

inline InstrumentTransform fit_instrument_learner(const Matrix& z_train, const Matrix& targets,
                                                  const InstrumentLearnerSpec& spec) {
  return InstrumentTransform::fit(z_train, targets, spec);
}

/// H = [1, g_1(Z), ..., g_p(Z)].
inline InstrumentFeatures instrument_features(const InstrumentTransform& eta, const Matrix& z) {
  return eta.features(z);
}

}  // namespace boostiv
