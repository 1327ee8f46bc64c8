#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "afw/core.hpp"

namespace afw {

/// Absolute slack on the norm inequality used by every `contains` check.
inline constexpr double kContainsSlack = 1e-9;

namespace detail {

inline void require_radius(double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("ball radius must be positive and finite");
  }
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear minimization oracles: argmin_{||x|| <= R} <theta, x>
// ---------------------------------------------------------------------------

/// v = -(R / ||theta||_2) theta
inline DenseVector lmo_l2(const DenseVector& theta, double radius) {
  detail::require_radius(radius);
  const double norm = theta.norm();
  if (norm == 0.0) throw ZeroDirection();
  return -(radius / norm) * theta;
}

/// Signed vertex -sgn(theta_i) R e_i at i = argmax |theta_i|, smallest index
/// on ties.
inline DenseVector lmo_l1(const DenseVector& theta, double radius) {
  detail::require_radius(radius);
  Index arg = -1;
  double best = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    if (std::abs(theta[i]) > best) {
      best = std::abs(theta[i]);
      arg = i;
    }
  }
  if (arg < 0) throw ZeroDirection();
  DenseVector v = DenseVector::Zero(theta.size());
  v[arg] = -detail::sign(theta[arg]) * radius;
  return v;
}

/// v_i = -sgn(theta_i) |theta_i|^{q-1} / ||theta||_q^{q-1} * R, 1/p + 1/q = 1.
///
/// Magnitudes are normalized by max|theta_i| first; when the dynamic range
/// of the nonzero entries exceeds 1e8 the weights are formed in log space.
inline DenseVector lmo_lp(const DenseVector& theta, double radius, double p) {
  detail::require_radius(radius);
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("lp ball needs p in (1, inf)");
  const double q = p / (p - 1.0);
  double max_abs = 0.0;
  double min_nonzero = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < theta.size(); ++i) {
    const double a = std::abs(theta[i]);
    if (a > 0.0) {
      max_abs = std::max(max_abs, a);
      min_nonzero = std::min(min_nonzero, a);
    }
  }
  if (max_abs == 0.0) throw ZeroDirection();

  DenseVector v = DenseVector::Zero(theta.size());
  if (max_abs / min_nonzero > 1e8) {
    // log t_i with t_i = |theta_i| / max, log ||t||_q^{q-1} via log-sum-exp
    const double log_max = std::log(max_abs);
    double log_sum = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < theta.size(); ++i) {
      if (theta[i] == 0.0) continue;
      const double lq = q * (std::log(std::abs(theta[i])) - log_max);
      const double hi = std::max(log_sum, lq);
      log_sum = hi + std::log(std::exp(log_sum - hi) + std::exp(lq - hi));
    }
    const double log_denominator = (q - 1.0) / q * log_sum;
    for (Index i = 0; i < theta.size(); ++i) {
      if (theta[i] == 0.0) continue;
      const double log_weight = (q - 1.0) * (std::log(std::abs(theta[i])) - log_max);
      v[i] = -detail::sign(theta[i]) * radius * std::exp(log_weight - log_denominator);
    }
    return v;
  }

  double sum_q = 0.0;
  for (Index i = 0; i < theta.size(); ++i) sum_q += std::pow(std::abs(theta[i]) / max_abs, q);
  const double denominator = std::pow(sum_q, (q - 1.0) / q);
  for (Index i = 0; i < theta.size(); ++i) {
    if (theta[i] == 0.0) continue;
    const double weight = std::pow(std::abs(theta[i]) / max_abs, q - 1.0);
    v[i] = -detail::sign(theta[i]) * radius * weight / denominator;
  }
  return v;
}

/// Rank-one matrix scale * left * right^T.
struct RankOne {
  double scale = 0.0;
  DenseVector left;
  DenseVector right;

  DenseMatrix to_dense() const { return scale * left * right.transpose(); }
};

struct PowerOptions {
  double tol = 1e-10;
  int max_iter = 1000;
  Seed seed{};
};

/// V = -R p q^T from the leading singular pair of the gradient, returned in
/// factored form.
inline RankOne lmo_nuclear(const SparseMatrix& grad, double radius, double tol, Seed seed,
                           int max_iter = 1000, const DenseVector* warm_start = nullptr) {
  detail::require_radius(radius);
  SingularTriplet top;
  try {
    top = top_singular_pair(grad, tol, max_iter, seed, warm_start);
  } catch (const ZeroOperator&) {
    throw ZeroDirection();
  }
  return RankOne{-radius, std::move(top.left), std::move(top.right)};
}

// ---------------------------------------------------------------------------
// Euclidean projections
// ---------------------------------------------------------------------------

inline DenseVector project_l2(const DenseVector& z, double radius) {
  detail::require_radius(radius);
  const double norm = z.norm();
  if (norm <= radius) return z;
  return (radius / norm) * z;
}

/// Sort-and-threshold projection onto the l1 ball: find tau from the sorted
/// magnitudes, then soft-threshold.
inline DenseVector project_l1(const DenseVector& z, double radius) {
  detail::require_radius(radius);
  if (z.lpNorm<1>() <= radius) return z;
  std::vector<double> u(static_cast<std::size_t>(z.size()));
  for (Index i = 0; i < z.size(); ++i) u[static_cast<std::size_t>(i)] = std::abs(z[i]);
  std::sort(u.begin(), u.end(), std::greater<>());
  double running = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    running += u[j];
    const double candidate = (running - radius) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) tau = candidate;
  }
  DenseVector x(z.size());
  for (Index i = 0; i < z.size(); ++i) {
    x[i] = detail::sign(z[i]) * std::max(std::abs(z[i]) - tau, 0.0);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Feasible sets over dense vectors
// ---------------------------------------------------------------------------

struct L2Ball {
  double radius;
};
struct L1Ball {
  double radius;
};
struct LpBall {
  double radius;
  double p;
};
/// Nuclear-norm ball over row-major vec(X), X of shape rows x cols.
struct NuclearBall {
  double radius;
  Index rows;
  Index cols;
};

using SetDescriptor = std::variant<L2Ball, L1Ball, LpBall, NuclearBall>;

inline double lp_norm(const DenseVector& x, double p) {
  const double max_abs = x.cwiseAbs().maxCoeff();
  if (max_abs == 0.0) return 0.0;
  double total = 0.0;
  for (Index i = 0; i < x.size(); ++i) total += std::pow(std::abs(x[i]) / max_abs, p);
  return max_abs * std::pow(total, 1.0 / p);
}

inline double nuclear_norm(const DenseMatrix& m) {
  Eigen::BDCSVD<DenseMatrix> svd(m);
  return svd.singularValues().sum();
}

/// A compact convex set with an LMO, a membership test, its Euclidean
/// diameter and, for l1/l2 balls, a projection.
class FeasibleSet {
 public:
  FeasibleSet(SetDescriptor descriptor, Index dim, PowerOptions power = {})
      : descriptor_(descriptor), dim_(dim), power_(power) {
    if (dim <= 0) throw InvalidArgument("feasible set dimension must be positive");
    std::visit([](const auto& d) { detail::require_radius(d.radius); }, descriptor_);
    if (const auto* lp = std::get_if<LpBall>(&descriptor_)) {
      if (!(lp->p > 1.0) || !std::isfinite(lp->p)) {
        throw InvalidArgument("lp ball needs p in (1, inf)");
      }
    }
    if (const auto* nb = std::get_if<NuclearBall>(&descriptor_)) {
      if (nb->rows <= 0 || nb->cols <= 0 || nb->rows * nb->cols != dim) {
        throw DimensionMismatch("nuclear ball shape does not match dimension");
      }
    }
  }

  static FeasibleSet l2_ball(double radius, Index dim) { return {L2Ball{radius}, dim}; }
  static FeasibleSet l1_ball(double radius, Index dim) { return {L1Ball{radius}, dim}; }
  static FeasibleSet lp_ball(double radius, double p, Index dim) { return {LpBall{radius, p}, dim}; }
  static FeasibleSet nuclear_ball(double radius, Index rows, Index cols, PowerOptions power = {}) {
    return {NuclearBall{radius, rows, cols}, rows * cols, power};
  }

  const SetDescriptor& descriptor() const { return descriptor_; }
  Index dim() const { return dim_; }
  double radius() const {
    return std::visit([](const auto& d) { return d.radius; }, descriptor_);
  }

  DenseVector lmo(const DenseVector& direction) const {
    check(direction);
    return std::visit(
        [&](const auto& d) -> DenseVector {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, L2Ball>) {
            return lmo_l2(direction, d.radius);
          } else if constexpr (std::is_same_v<T, L1Ball>) {
            return lmo_l1(direction, d.radius);
          } else if constexpr (std::is_same_v<T, LpBall>) {
            return lmo_lp(direction, d.radius, d.p);
          } else {
            const SparseMatrix g = SparseMatrix::from_dense(reshape(direction, d));
            const RankOne atom = lmo_nuclear(g, d.radius, power_.tol, power_.seed, power_.max_iter);
            const DenseMatrix v = atom.to_dense();
            return flatten(v);
          }
        },
        descriptor_);
  }

  /// Norm that defines the ball.
  double norm(const DenseVector& x) const {
    check(x);
    return std::visit(
        [&](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, L2Ball>) {
            return x.norm();
          } else if constexpr (std::is_same_v<T, L1Ball>) {
            return x.lpNorm<1>();
          } else if constexpr (std::is_same_v<T, LpBall>) {
            return lp_norm(x, d.p);
          } else {
            return nuclear_norm(reshape(x, d));
          }
        },
        descriptor_);
  }

  bool contains(const DenseVector& x) const {
    return x.size() == dim_ && x.allFinite() && norm(x) <= radius() + kContainsSlack;
  }

  /// Euclidean (Frobenius for matrices) diameter.
  double diameter() const {
    if (const auto* lp = std::get_if<LpBall>(&descriptor_); lp && lp->p > 2.0) {
      return 2.0 * lp->radius * std::pow(static_cast<double>(dim_), 0.5 - 1.0 / lp->p);
    }
    return 2.0 * radius();
  }

  bool has_projection() const {
    return std::holds_alternative<L2Ball>(descriptor_) ||
           std::holds_alternative<L1Ball>(descriptor_);
  }

  DenseVector project(const DenseVector& z) const {
    check(z);
    if (const auto* b = std::get_if<L2Ball>(&descriptor_)) return project_l2(z, b->radius);
    if (const auto* b = std::get_if<L1Ball>(&descriptor_)) return project_l1(z, b->radius);
    throw MissingProjection("no projection available for " + describe());
  }

  std::string describe() const {
    std::ostringstream out;
    out.precision(17);
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, L2Ball>) {
            out << "l2_ball(R=" << d.radius << ")";
          } else if constexpr (std::is_same_v<T, L1Ball>) {
            out << "l1_ball(R=" << d.radius << ")";
          } else if constexpr (std::is_same_v<T, LpBall>) {
            out << "lp_ball(R=" << d.radius << ",p=" << d.p << ")";
          } else {
            out << "nuclear_ball(R=" << d.radius << ",m=" << d.rows << ",n=" << d.cols << ")";
          }
        },
        descriptor_);
    return out.str();
  }

 private:
  void check(const DenseVector& x) const {
    if (x.size() != dim_) throw DimensionMismatch("point has wrong dimension for " + describe());
  }

  static DenseMatrix reshape(const DenseVector& x, const NuclearBall& d) {
    DenseMatrix m(d.rows, d.cols);
    for (Index i = 0; i < d.rows; ++i) {
      for (Index j = 0; j < d.cols; ++j) m(i, j) = x[i * d.cols + j];
    }
    return m;
  }

  static DenseVector flatten(const DenseMatrix& m) {
    DenseVector x(m.size());
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) x[i * m.cols() + j] = m(i, j);
    }
    return x;
  }

  SetDescriptor descriptor_;
  Index dim_;
  PowerOptions power_;
};

}  // namespace afw
