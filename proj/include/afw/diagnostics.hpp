#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "afw/spaces.hpp"
#include "afw/trace.hpp"

namespace afw {

/// FW gap <grad, x - lmo(grad)> over the space's feasible set. A zero
/// gradient has gap 0.
template <IterateSpace S>
double fw_gap(const S& space, const typename S::Dual& grad, const typename S::Point& x) {
  if (space.is_zero(grad)) return 0.0;
  try {
    const typename S::Point v = space.lmo(grad);
    return space.dot_diff(grad, x, v);
  } catch (const ZeroDirection&) {
    return 0.0;
  }
}

inline double fw_gap(const DenseVector& grad, const DenseVector& x, const FeasibleSet& set) {
  if (x.size() != set.dim() || grad.size() != set.dim()) {
    throw DimensionMismatch("fw_gap: gradient, point and set dimensions differ");
  }
  try {
    return grad.dot(x - set.lmo(grad));
  } catch (const ZeroDirection&) {
    return 0.0;
  }
}

/// Estimate-sequence bookkeeping of AFW: the linear surrogate
/// Phi_k(x) = phi_star + <x - v, theta> together with lambda_k and xi_k.
template <class Point, class Dual>
struct BasicSurrogateState {
  Dual theta;
  Point v;
  double phi_star = 0.0;
  double lambda = 1.0;
  double xi = 0.0;
  std::int64_t k = 0;
};

using SurrogateState = BasicSurrogateState<DenseVector, DenseVector>;

template <IterateSpace S>
BasicSurrogateState<typename S::Point, typename S::Dual> initial_surrogate(
    const S& space, const typename S::Point& x0, double f0) {
  return {space.zero_dual(), x0, f0, 1.0, 0.0, 0};
}

inline SurrogateState initial_surrogate(const DenseVector& x0, double f0) {
  return {DenseVector::Zero(x0.size()), x0, f0, 1.0, 0.0, 0};
}

/// Advances (theta, v, phi_star, lambda, xi) by one AFW iteration.
template <class Ops, class Point, class Dual>
BasicSurrogateState<Point, Dual> surrogate_step(const Ops& ops,
                                                const BasicSurrogateState<Point, Dual>& state,
                                                double delta, double f_y, const Dual& grad_y,
                                                const Point& y, const Point& v_next, double L) {
  BasicSurrogateState<Point, Dual> next;
  const double keep = 1.0 - delta;
  next.phi_star = keep * state.phi_star + delta * f_y +
                  keep * ops.dot_diff(state.theta, v_next, state.v) +
                  delta * ops.dot_diff(grad_y, v_next, y);
  next.xi = keep * state.xi + 0.5 * L * delta * delta * ops.distance_sq(v_next, state.v);
  next.lambda = keep * state.lambda;
  next.theta = ops.combine_dual(state.theta, grad_y, delta);
  next.v = v_next;
  next.k = state.k + 1;
  return next;
}

inline SurrogateState surrogate_step(const SurrogateState& state, double delta, double f_y,
                                     const DenseVector& grad_y, const DenseVector& y,
                                     const DenseVector& v_next, double L) {
  return surrogate_step(EuclideanOps{}, state, delta, f_y, grad_y, y, v_next, L);
}

/// w_k^(tau) = 2(tau + 2) / (k (k + 3)) for tau = 0..k-1.
inline std::vector<double> dual_gap_weights(std::int64_t k) {
  if (k < 1) throw InvalidArgument("dual gap weights need k >= 1");
  std::vector<double> w(static_cast<std::size_t>(k));
  const double denom = static_cast<double>(k) * static_cast<double>(k + 3);
  for (std::int64_t tau = 0; tau < k; ++tau) {
    w[static_cast<std::size_t>(tau)] = 2.0 * static_cast<double>(tau + 2) / denom;
  }
  return w;
}

/// One term of the weighted dual gap: the supporting hyperplane at y_tau
/// evaluated at v_{tau+1}.
struct DualGapSample {
  double f_y;
  DenseVector grad_y;
  DenseVector v_next;
  DenseVector y;

  double model() const { return f_y + grad_y.dot(v_next - y); }
};

/// sum_tau w_k^(tau) d_tau from precomputed d_tau = f(y_tau) + <grad f(y_tau), v_{tau+1} - y_tau>.
inline double weighted_dual_gap(std::span<const double> models, std::int64_t k) {
  if (k < 1) throw IncompleteTrace("weighted dual gap needs k >= 1");
  if (static_cast<std::int64_t>(models.size()) < k) {
    throw IncompleteTrace("weighted dual gap at k = " + std::to_string(k) + " needs " +
                          std::to_string(k) + " terms, got " + std::to_string(models.size()));
  }
  const auto w = dual_gap_weights(k);
  double total = 0.0;
  for (std::int64_t tau = 0; tau < k; ++tau) {
    const double d = models[static_cast<std::size_t>(tau)];
    if (!std::isfinite(d)) {
      throw IncompleteTrace("weighted dual gap: term " + std::to_string(tau) + " is missing");
    }
    total += w[static_cast<std::size_t>(tau)] * d;
  }
  return total;
}

inline double weighted_dual_gap(std::span<const DualGapSample> samples, std::int64_t k) {
  if (k < 1 || static_cast<std::int64_t>(samples.size()) < k) {
    throw IncompleteTrace("weighted dual gap at k = " + std::to_string(k) + " has " +
                          std::to_string(samples.size()) + " samples");
  }
  std::vector<double> models;
  models.reserve(static_cast<std::size_t>(k));
  for (std::int64_t tau = 0; tau < k; ++tau) models.push_back(samples[tau].model());
  return weighted_dual_gap(std::span<const double>(models), k);
}

/// Reads the model_y column of an AGM trace (row tau holds d_tau).
inline double weighted_dual_gap(const SolverTrace& trace, std::int64_t k) {
  const auto models = trace.column_values(columns::kModelY);
  return weighted_dual_gap(std::span<const double>(models), k);
}

struct MomentumCheck {
  DenseVector closed;
  double residual = 0.0;
};

/// v = v_k - (delta / mu_next) grad and the residual of the first-order
/// condition grad + (mu_next / delta)(v - v_k) = 0.
inline MomentumCheck agm_momentum_equivalence(const DenseVector& v_k, const DenseVector& grad_y,
                                              double delta, double mu_next) {
  if (!(delta > 0.0) || !(mu_next > 0.0)) {
    throw InvalidArgument("momentum check needs delta > 0 and mu_next > 0");
  }
  if (v_k.size() != grad_y.size()) throw DimensionMismatch("momentum check: size mismatch");
  MomentumCheck out;
  out.closed = v_k - (delta / mu_next) * grad_y;
  out.residual = (grad_y + (mu_next / delta) * (out.closed - v_k)).norm();
  return out;
}

struct RateWindow {
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
};

inline RateWindow default_rate_window(std::int64_t k_total) {
  return {std::max<std::int64_t>(100, k_total / 100), k_total};
}

struct RateReport {
  double slope = 0.0;
  double intercept = 0.0;
  RateWindow window;
  double r_squared = 0.0;
  std::size_t used = 0;
  std::vector<std::int64_t> excluded;  // k with gap <= 1e-14
};

inline constexpr double kGapFloor = 1e-14;

/// Least-squares fit of log(f(x_k) - f_star) against log k over the window.
inline RateReport estimate_rate(const SolverTrace& trace, double f_star, RateWindow window) {
  if (window.k_min < 1 || window.k_max <= window.k_min) {
    throw InvalidArgument("rate window needs 1 <= k_min < k_max");
  }
  RateReport report;
  report.window = window;
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& row : trace.rows) {
    if (row.k < window.k_min || row.k > window.k_max) continue;
    const double gap = row.f_value - f_star;
    if (gap < -kGapFloor) {
      throw NegativeGap("f(x_" + std::to_string(row.k) + ") is below f_star by " +
                        std::to_string(-gap));
    }
    if (gap <= kGapFloor) {
      report.excluded.push_back(row.k);
      continue;
    }
    xs.push_back(std::log(static_cast<double>(row.k)));
    ys.push_back(std::log(gap));
  }
  report.used = xs.size();
  if (xs.size() < 10) {
    throw EmptyWindow("rate window [" + std::to_string(window.k_min) + ", " +
                      std::to_string(window.k_max) + "] has " + std::to_string(xs.size()) +
                      " usable rows, need 10");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  report.slope = sxy / sxx;
  report.intercept = my - report.slope * mx;
  report.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return report;
}

/// Standard deviation of successive differences f(x_{k+1}) - f(x_k) over
/// the window. Informational only.
inline double zigzag_dispersion(const SolverTrace& trace, RateWindow window) {
  std::vector<double> diffs;
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    const auto& prev = trace.rows[i - 1];
    const auto& row = trace.rows[i];
    if (prev.k < window.k_min || row.k > window.k_max) continue;
    diffs.push_back(row.f_value - prev.f_value);
  }
  if (diffs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(diffs.size());
  double var = 0.0;
  for (double d : diffs) var += (d - mean) * (d - mean);
  return std::sqrt(var / static_cast<double>(diffs.size() - 1));
}

inline nlohmann::json to_json(const RateReport& r) {
  return {{"slope", r.slope},
          {"intercept", r.intercept},
          {"window", {r.window.k_min, r.window.k_max}},
          {"r_squared", r.r_squared},
          {"used_rows", r.used},
          {"excluded_rows", r.excluded.size()}};
}

}  // namespace afw
