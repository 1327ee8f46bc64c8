#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "afw/core.hpp"

namespace afw {

/// Smooth convex function with exact gradient and a gradient-Lipschitz bound.
///
/// Cheap to copy: the callables capture their data by shared pointer.
class Objective {
 public:
  using ValueFn = std::function<double(const DenseVector&)>;
  using GradientFn = std::function<DenseVector(const DenseVector&)>;

  Objective(Index dim, ValueFn value, GradientFn gradient, double smoothness,
            std::optional<double> strong_convexity = std::nullopt)
      : dim_(dim),
        value_(std::move(value)),
        gradient_(std::move(gradient)),
        smoothness_(smoothness),
        strong_convexity_(strong_convexity) {
    if (dim <= 0) throw InvalidArgument("objective dimension must be positive");
    if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
      throw InvalidArgument("smoothness constant must be positive and finite");
    }
    if (strong_convexity && !(*strong_convexity > 0.0 && *strong_convexity <= smoothness)) {
      throw InvalidArgument("strong convexity constant must lie in (0, L]");
    }
  }

  Index dim() const { return dim_; }

  double value(const DenseVector& x) const {
    check(x);
    return value_(x);
  }

  DenseVector gradient(const DenseVector& x) const {
    check(x);
    return gradient_(x);
  }

  double smoothness() const { return smoothness_; }
  const std::optional<double>& strong_convexity() const { return strong_convexity_; }

 private:
  void check(const DenseVector& x) const {
    if (x.size() != dim_) {
      throw DimensionMismatch("objective expects dimension " + std::to_string(dim_) + ", got " +
                              std::to_string(x.size()));
    }
  }

  Index dim_;
  ValueFn value_;
  GradientFn gradient_;
  double smoothness_;
  std::optional<double> strong_convexity_;
};

/// f(x) = scale * ||x - center||^2
inline Objective quadratic_objective(DenseVector center, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("quadratic scale must be positive");
  auto c = std::make_shared<const DenseVector>(std::move(center));
  const Index dim = c->size();
  return Objective(
      dim, [c, scale](const DenseVector& x) { return scale * (x - *c).squaredNorm(); },
      [c, scale](const DenseVector& x) -> DenseVector { return 2.0 * scale * (x - *c); },
      2.0 * scale, 2.0 * scale);
}

/// f(x) = sum_i w_i (x_i - c_i)^2 with all w_i > 0; L = 2 max w, mu = 2 min w.
inline Objective diagonal_quadratic_objective(DenseVector weights, DenseVector center) {
  if (weights.size() != center.size()) {
    throw DimensionMismatch("diagonal quadratic: weights and center differ in length");
  }
  if (weights.size() == 0 || (weights.array() <= 0.0).any()) {
    throw InvalidArgument("diagonal quadratic weights must be positive");
  }
  const double L = 2.0 * weights.maxCoeff();
  const double mu = 2.0 * weights.minCoeff();
  auto w = std::make_shared<const DenseVector>(std::move(weights));
  auto c = std::make_shared<const DenseVector>(std::move(center));
  return Objective(
      w->size(),
      [w, c](const DenseVector& x) { return (w->array() * (x - *c).array().square()).sum(); },
      [w, c](const DenseVector& x) -> DenseVector {
        return (2.0 * w->array() * (x - *c).array()).matrix();
      },
      L, mu);
}

struct LogisticProblem {
  SparseMatrix features;       // n x d, row i = a_i
  std::vector<double> labels;  // b_i in {-1, +1}

  LogisticProblem(SparseMatrix a, std::vector<double> b)
      : features(std::move(a)), labels(std::move(b)) {
    if (static_cast<Index>(labels.size()) != features.rows()) {
      throw DimensionMismatch("logistic problem: label count differs from row count");
    }
    for (double l : labels) {
      if (l != 1.0 && l != -1.0) throw InvalidArgument("logistic labels must be -1 or +1");
    }
  }

  Index samples() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

/// ln(1 + exp(t)) without overflow.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

/// 1 / (1 + exp(-t)) without overflow.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Upper bound lambda_max(A^T A) / (4n) on the logistic gradient's Lipschitz
/// constant. The Rayleigh estimate is padded by its residual norm.
inline double logistic_smoothness(const SparseMatrix& a, Seed seed = {}) {
  auto gram = [&a](const DenseVector& x) -> DenseVector {
    return a.multiply_transpose(a.multiply(x));
  };
  EigenPair top = power_iteration(gram, a.cols(), 1e-12, 20000, seed);
  return (top.value + top.residual) / (4.0 * static_cast<double>(a.rows()));
}

/// f(x) = (1/n) sum_i ln(1 + exp(-b_i <a_i, x>))
inline Objective logistic_objective(const LogisticProblem& problem, Seed seed = {}) {
  auto p = std::make_shared<const LogisticProblem>(problem);
  const double n = static_cast<double>(p->samples());
  auto value = [p, n](const DenseVector& x) {
    const DenseVector z = p->features.multiply(x);
    double total = 0.0;
    for (Index i = 0; i < z.size(); ++i) total += softplus(-p->labels[i] * z[i]);
    return total / n;
  };
  auto gradient = [p, n](const DenseVector& x) -> DenseVector {
    const DenseVector z = p->features.multiply(x);
    DenseVector weights(z.size());
    for (Index i = 0; i < z.size(); ++i) {
      const double b = p->labels[i];
      weights[i] = -b * sigmoid(-b * z[i]) / n;
    }
    return p->features.multiply_transpose(weights);
  };
  return Objective(p->dim(), value, gradient, logistic_smoothness(p->features, seed));
}

struct MatCompProblem {
  SparseMatrix observed;  // m x n, entries A_ij on the observation mask K

  explicit MatCompProblem(SparseMatrix a) : observed(std::move(a)) {
    if (observed.nnz() == 0) throw InvalidArgument("matrix completion needs observed entries");
  }

  Index rows() const { return observed.rows(); }
  Index cols() const { return observed.cols(); }
};

/// f(X) = 1/2 sum_{(i,j) in K} (X_ij - A_ij)^2 over row-major vec(X) of
/// length m*n. The gradient is supported on K and L = 1.
inline Objective matcomp_objective(const MatCompProblem& problem) {
  auto p = std::make_shared<const MatCompProblem>(problem);
  const Index cols = p->cols();
  auto value = [p, cols](const DenseVector& x) {
    double total = 0.0;
    for (const auto& e : p->observed.entries()) {
      const double r = x[e.row * cols + e.col] - e.value;
      total += r * r;
    }
    return 0.5 * total;
  };
  auto gradient = [p, cols](const DenseVector& x) -> DenseVector {
    DenseVector g = DenseVector::Zero(x.size());
    for (const auto& e : p->observed.entries()) {
      const Index idx = e.row * cols + e.col;
      g[idx] = x[idx] - e.value;
    }
    return g;
  };
  return Objective(p->rows() * p->cols(), value, gradient, 1.0);
}

}  // namespace afw
