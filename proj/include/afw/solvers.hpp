#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "afw/diagnostics.hpp"
#include "afw/spaces.hpp"
#include "afw/trace.hpp"

namespace afw {

/// Open-loop step sizes delta_k.
class Schedule {
 public:
  enum class Kind { fw_classic, afw_shifted, custom };

  /// delta_k = 2 / (k + 2)
  static Schedule fw_classic() {
    return Schedule(Kind::fw_classic, "fw_classic",
                    [](std::int64_t k) { return 2.0 / static_cast<double>(k + 2); });
  }

  /// delta_k = 2 / (k + 3)
  static Schedule afw_shifted() {
    return Schedule(Kind::afw_shifted, "afw_shifted",
                    [](std::int64_t k) { return 2.0 / static_cast<double>(k + 3); });
  }

  static Schedule custom(std::string name, std::function<double(std::int64_t)> delta) {
    if (!delta) throw InvalidArgument("custom schedule needs a step function");
    return Schedule(Kind::custom, std::move(name), std::move(delta));
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  double delta(std::int64_t k) const {
    if (k < 0) throw InvalidArgument("schedule queried at negative k");
    const double d = delta_(k);
    if (!(d > 0.0 && d <= 1.0)) {
      throw InvalidArgument("schedule '" + name_ + "' gave delta_" + std::to_string(k) + " = " +
                            std::to_string(d) + " outside (0, 1]");
    }
    return d;
  }

 private:
  Schedule(Kind kind, std::string name, std::function<double(std::int64_t)> delta)
      : kind_(kind), name_(std::move(name)), delta_(std::move(delta)) {}

  Kind kind_;
  std::string name_;
  std::function<double(std::int64_t)> delta_;
};

struct StoppingRule {
  std::int64_t max_iters = 1000;
  std::optional<double> gap_tol;
  std::optional<std::chrono::nanoseconds> time_budget;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
    if (gap_tol && !(*gap_tol >= 0.0)) throw InvalidArgument("gap_tol must be >= 0");
  }
};

struct TraceOptions {
  bool diagnostics = false;   // AFW: phi_star, xi, lambda columns
  bool wall_time = false;     // otherwise wall_time_ns is written as 0
  bool fw_gap = true;         // AFW/AGM/PGD pay an extra LMO for this column
  bool rank_samples = false;  // matrix iterates: rank at log points
  std::string problem;
  std::uint64_t seed = 0;
  std::optional<DenseVector> x_star;  // AGM: records ||v_k - x*||^2
};

/// k in {0, 1, 2, 5, 10, 20, 50, ...}
inline bool is_log_point(std::int64_t k) {
  if (k <= 2) return k >= 0;
  while (k % 10 == 0) k /= 10;
  return k == 1 || k == 2 || k == 5;
}

/// Quantities of one FW/AFW step k -> k+1, passed to an optional observer.
template <class Point, class Dual>
struct StepEvent {
  std::int64_t k;
  double delta;
  const Point& x;       // x_k
  const Point& y;       // y_k (x_k for FW)
  const Dual& grad_y;   // gradient at y_k
  const Dual& theta;    // theta_{k+1} (the gradient itself for FW)
  const Point& v_next;  // v_{k+1}
  const Point& x_next;  // x_{k+1}
};

/// One AGM step k -> k+1.
struct AgmEvent {
  std::int64_t k;
  double delta;
  const DenseVector& y;       // y_k
  const DenseVector& grad_y;  // gradient at y_k
  const DenseVector& x_next;  // x_{k+1}
  const DenseVector& v_next;  // v_{k+1}
  double mu_next;             // mu_{k+1}
};

/// One projected-gradient step k -> k+1.
struct GradientEvent {
  std::int64_t k;
  const DenseVector& x;       // x_k
  const DenseVector& x_next;  // x_{k+1}
};

struct NoObserver {
  template <class E>
  void operator()(const E&) const {}
};

namespace detail {

using Clock = std::chrono::steady_clock;

class StepTimer {
 public:
  explicit StepTimer(bool enabled) : enabled_(enabled) {}
  void start() {
    if (enabled_) begin_ = Clock::now();
  }
  void stop() {
    if (enabled_) total_ += Clock::now() - begin_;
  }
  std::int64_t total_ns() const {
    return enabled_ ? std::chrono::duration_cast<std::chrono::nanoseconds>(total_).count() : 0;
  }

 private:
  bool enabled_;
  Clock::time_point begin_{};
  Clock::duration total_{};
};

/// Evaluates stopping conditions after row k has been recorded.
inline bool should_stop(const StoppingRule& stop, std::int64_t k, double gap,
                        Clock::time_point started) {
  if (k >= stop.max_iters) return true;
  if (stop.gap_tol && gap <= *stop.gap_tol) return true;
  if (stop.time_budget && Clock::now() - started >= *stop.time_budget) return true;
  return false;
}

template <class S>
std::string describe_space(const S& space) {
  if constexpr (requires { space.describe(); }) {
    return space.describe();
  } else {
    return {};
  }
}

template <class S>
void maybe_sample_rank(const S& space, const TraceOptions& opts, std::int64_t k,
                       const typename S::Point& x, bool last, SolverTrace& trace) {
  if constexpr (requires { space.rank_sample(k, x); }) {
    if (opts.rank_samples && (is_log_point(k) || last)) {
      if (trace.rank_samples.empty() || trace.rank_samples.back().k != k) {
        trace.rank_samples.push_back(space.rank_sample(k, x));
      }
    }
  }
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Uses the space's warm-started oracle when it has one.
template <class S>
typename S::Point solver_lmo(const S& space, const typename S::Dual& direction,
                             const typename S::Point& previous) {
  if constexpr (requires { space.lmo(direction, previous); }) {
    return space.lmo(direction, previous);
  } else {
    return space.lmo(direction);
  }
}

}  // namespace detail

/// Frank-Wolfe: v_{k+1} = lmo(grad f(x_k)), x_{k+1} = (1 - delta_k) x_k + delta_k v_{k+1}.
///
/// A zero gradient keeps v_{k+1} = v_k; since x_k is then a global minimizer
/// the run ends there with `stationary` set.
template <IterateSpace S, class Observer = NoObserver>
SolverTrace run_fw(const S& space, const typename S::Point& x0,
                   const Schedule& schedule = Schedule::fw_classic(), const StoppingRule& stop = {},
                   const TraceOptions& opts = {}, Observer&& observe = {}) {
  using Point = typename S::Point;
  stop.validate();
  if (!space.contains(x0)) throw InfeasibleStart("run_fw: x0 is outside the feasible set");

  SolverTrace trace;
  trace.meta = {"fw", schedule.name(), opts.seed, opts.problem, detail::describe_space(space)};
  const auto started = detail::Clock::now();
  detail::StepTimer timer(opts.wall_time);

  Point x = x0;
  Point v = x0;
  for (std::int64_t k = 0;; ++k) {
    const double fx = space.value(x);
    timer.start();
    const auto g = space.gradient(x);
    std::optional<Point> v_next;
    if (!space.is_zero(g)) {
      try {
        v_next = detail::solver_lmo(space, g, v);
      } catch (const ZeroDirection&) {
      }
    }
    timer.stop();
    const bool zero = !v_next.has_value();
    const double gap = zero ? 0.0 : space.dot_diff(g, x, *v_next);
    const double delta = schedule.delta(k);
    trace.rows.push_back({k, fx, gap, delta, timer.total_ns(), {}});

    const bool last = zero || detail::should_stop(stop, k, gap, started);
    detail::maybe_sample_rank(space, opts, k, x, last, trace);
    if (zero) trace.stationary = true;
    if (last) break;

    timer.start();
    v = std::move(*v_next);
    Point x_next = space.combine(x, v, delta);
    timer.stop();
    observe(StepEvent<Point, typename S::Dual>{k, delta, x, x, g, g, v, x_next});
    x = std::move(x_next);
  }
  return trace;
}

/// Accelerated Frank-Wolfe:
///   y_k = (1 - delta_k) x_k + delta_k v_k
///   theta_{k+1} = (1 - delta_k) theta_k + delta_k grad f(y_k)
///   v_{k+1} = lmo(theta_{k+1})
///   x_{k+1} = (1 - delta_k) x_k + delta_k v_{k+1}
/// with theta_0 = 0 and v_0 = x_0. A zero theta keeps v_{k+1} = v_k; at
/// k = 0 this means grad f(x_0) = 0 and the run ends as stationary.
template <IterateSpace S, class Observer = NoObserver>
SolverTrace run_afw(const S& space, const typename S::Point& x0,
                    const Schedule& schedule = Schedule::afw_shifted(),
                    const StoppingRule& stop = {}, const TraceOptions& opts = {},
                    Observer&& observe = {}) {
  using Point = typename S::Point;
  using Dual = typename S::Dual;
  stop.validate();
  if (!space.contains(x0)) throw InfeasibleStart("run_afw: x0 is outside the feasible set");

  SolverTrace trace;
  trace.meta = {"afw", schedule.name(), opts.seed, opts.problem, detail::describe_space(space)};
  if (opts.diagnostics) trace.extra_columns = {columns::kPhiStar, columns::kXi, columns::kLambda};
  const auto started = detail::Clock::now();
  detail::StepTimer timer(opts.wall_time);
  const double L = space.smoothness();

  Point x = x0;
  Point v = x0;
  Dual theta = space.zero_dual();
  std::optional<BasicSurrogateState<Point, Dual>> es;

  for (std::int64_t k = 0;; ++k) {
    const double fx = space.value(x);
    if (opts.diagnostics && !es) es = initial_surrogate(space, x0, fx);
    const double gap = opts.fw_gap ? fw_gap(space, space.gradient(x), x) : detail::kNaN;
    const double delta = schedule.delta(k);
    TraceRow row{k, fx, gap, delta, timer.total_ns(), {}};
    if (es) row.extra = {es->phi_star, es->xi, es->lambda};
    trace.rows.push_back(std::move(row));

    const bool last = detail::should_stop(stop, k, gap, started);
    detail::maybe_sample_rank(space, opts, k, x, last, trace);
    if (last) break;

    timer.start();
    Point y = space.combine(x, v, delta);
    Dual g = space.gradient(y);
    Dual theta_next = space.combine_dual(theta, g, delta);
    std::optional<Point> v_next;
    if (!space.is_zero(theta_next)) {
      try {
        v_next = detail::solver_lmo(space, theta_next, v);
      } catch (const ZeroDirection&) {
      }
    }
    if (!v_next && k == 0) {
      timer.stop();
      trace.stationary = true;
      break;
    }
    if (!v_next) v_next = v;
    Point x_next = space.combine(x, *v_next, delta);
    timer.stop();

    if (es) es = surrogate_step(space, *es, delta, space.value(y), g, y, *v_next, L);
    observe(StepEvent<Point, Dual>{k, delta, x, y, g, theta_next, *v_next, x_next});
    theta = std::move(theta_next);
    v = std::move(*v_next);
    x = std::move(x_next);
  }
  if (trace.stationary) detail::maybe_sample_rank(space, opts, trace.last_k(), x, true, trace);
  return trace;
}

inline SolverTrace run_fw(const Objective& obj, const FeasibleSet& set, const DenseVector& x0,
                          const Schedule& schedule = Schedule::fw_classic(),
                          const StoppingRule& stop = {}, const TraceOptions& opts = {}) {
  return run_fw(VectorSpace(obj, set), x0, schedule, stop, opts);
}

inline SolverTrace run_afw(const Objective& obj, const FeasibleSet& set, const DenseVector& x0,
                           const Schedule& schedule = Schedule::afw_shifted(),
                           const StoppingRule& stop = {}, const TraceOptions& opts = {}) {
  return run_afw(VectorSpace(obj, set), x0, schedule, stop, opts);
}

/// Nesterov's accelerated gradient method with delta_k = 2/(k+3), mu_0 = 2L:
///   y_k = delta_k v_k + (1 - delta_k) x_k
///   x_{k+1} = y_k - grad f(y_k) / L
///   mu_{k+1} = (1 - delta_k) mu_k
///   v_{k+1} = v_k - (delta_k / mu_{k+1}) grad f(y_k)
/// Given a set with a projection, both x_{k+1} and v_{k+1} are projected.
///
/// Row k carries ||grad f(y_k)||^2 and the model value
/// f(y_k) + <grad f(y_k), v_{k+1} - y_k> (NaN on the last row), plus
/// ||v_k - x*||^2 when x* is supplied and mu_k.
template <class Observer = NoObserver>
SolverTrace run_agm(const Objective& obj, const DenseVector& x0, const StoppingRule& stop = {},
                    const FeasibleSet* set = nullptr, const TraceOptions& opts = {},
                    Observer&& observe = {}) {
  stop.validate();
  if (x0.size() != obj.dim()) throw DimensionMismatch("run_agm: x0 has wrong dimension");
  if (set) {
    if (!set->has_projection()) {
      throw MissingProjection("run_agm: no projection available for " + set->describe());
    }
    if (!set->contains(x0)) throw InfeasibleStart("run_agm: x0 is outside the feasible set");
  }
  if (opts.x_star && opts.x_star->size() != x0.size()) {
    throw DimensionMismatch("run_agm: x_star has wrong dimension");
  }

  SolverTrace trace;
  trace.meta = {set ? "agm_projected" : "agm", "agm", opts.seed, opts.problem,
                set ? set->describe() : "unconstrained"};
  trace.extra_columns = {columns::kGradSqY, columns::kModelY, columns::kVDistSq, columns::kMu};
  const auto started = detail::Clock::now();
  detail::StepTimer timer(opts.wall_time);
  const double L = obj.smoothness();
  const Schedule schedule = Schedule::afw_shifted();

  DenseVector x = x0;
  DenseVector v = x0;
  double mu = 2.0 * L;
  for (std::int64_t k = 0;; ++k) {
    const double fx = obj.value(x);
    double gap = detail::kNaN;
    if (set && opts.fw_gap) gap = fw_gap(obj.gradient(x), x, *set);
    const double delta = schedule.delta(k);
    const double v_dist = opts.x_star ? (v - *opts.x_star).squaredNorm() : detail::kNaN;
    trace.rows.push_back(
        {k, fx, gap, delta, timer.total_ns(), {detail::kNaN, detail::kNaN, v_dist, mu}});
    if (detail::should_stop(stop, k, gap, started)) break;

    timer.start();
    // x + delta (v - x) is exact when v == x
    const DenseVector y = x + delta * (v - x);
    const DenseVector g = obj.gradient(y);
    DenseVector x_next = y - g / L;
    const double mu_next = (1.0 - delta) * mu;
    DenseVector v_next = v - (delta / mu_next) * g;
    if (set) {
      x_next = set->project(x_next);
      v_next = set->project(v_next);
    }
    timer.stop();

    auto& extra = trace.rows.back().extra;
    extra[0] = g.squaredNorm();
    extra[1] = obj.value(y) + g.dot(v_next - y);
    observe(AgmEvent{k, delta, y, g, x_next, v_next, mu_next});
    x = std::move(x_next);
    v = std::move(v_next);
    mu = mu_next;
  }
  return trace;
}

/// Strongly convex variant with delta = 1/sqrt(kappa):
///   y_k = (x_k + delta v_k) / (1 + delta)
///   x_{k+1} = y_k - grad f(y_k) / L
///   v_{k+1} = (1 - delta) v_k + delta y_k - (delta / mu) grad f(y_k)
/// Row k records max |v_{k+1} - ((1 - delta) v_k + delta z_{k+1})| with
/// z_{k+1} = y_k - grad f(y_k) / mu.
inline SolverTrace run_agm_sc(const Objective& obj, const DenseVector& x0,
                              const StoppingRule& stop = {}, const TraceOptions& opts = {}) {
  stop.validate();
  if (!obj.strong_convexity()) throw MissingStrongConvexity();
  if (x0.size() != obj.dim()) throw DimensionMismatch("run_agm_sc: x0 has wrong dimension");

  const double L = obj.smoothness();
  const double mu = *obj.strong_convexity();
  const double delta = 1.0 / std::sqrt(L / mu);

  SolverTrace trace;
  trace.meta = {"agm_sc", "constant", opts.seed, opts.problem, "unconstrained"};
  trace.extra_columns = {columns::kMomentumResidual};
  const auto started = detail::Clock::now();
  detail::StepTimer timer(opts.wall_time);

  DenseVector x = x0;
  DenseVector v = x0;
  for (std::int64_t k = 0;; ++k) {
    const double fx = obj.value(x);
    trace.rows.push_back({k, fx, detail::kNaN, delta, timer.total_ns(), {detail::kNaN}});
    if (detail::should_stop(stop, k, detail::kNaN, started)) break;

    timer.start();
    const DenseVector y = (x + delta * v) / (1.0 + delta);
    const DenseVector g = obj.gradient(y);
    DenseVector x_next = y - g / L;
    DenseVector v_next = (1.0 - delta) * v + delta * y - (delta / mu) * g;
    timer.stop();

    const DenseVector z = y - g / mu;
    const DenseVector split = (1.0 - delta) * v + delta * z;
    trace.rows.back().extra[0] = (v_next - split).cwiseAbs().maxCoeff();
    x = std::move(x_next);
    v = std::move(v_next);
  }
  return trace;
}

/// x_{k+1} = proj(x_k - grad f(x_k) / L)
template <class Observer = NoObserver>
SolverTrace run_projected_gd(const Objective& obj, const FeasibleSet& set, const DenseVector& x0,
                             const StoppingRule& stop = {}, const TraceOptions& opts = {},
                             Observer&& observe = {}) {
  stop.validate();
  if (!set.has_projection()) {
    throw MissingProjection("run_projected_gd: no projection available for " + set.describe());
  }
  if (!set.contains(x0)) throw InfeasibleStart("run_projected_gd: x0 is outside the feasible set");

  SolverTrace trace;
  trace.meta = {"pgd", "constant", opts.seed, opts.problem, set.describe()};
  const auto started = detail::Clock::now();
  detail::StepTimer timer(opts.wall_time);
  const double L = obj.smoothness();

  DenseVector x = x0;
  for (std::int64_t k = 0;; ++k) {
    const double fx = obj.value(x);
    timer.start();
    const DenseVector g = obj.gradient(x);
    timer.stop();
    double gap = detail::kNaN;
    if (opts.fw_gap) {
      try {
        gap = g.dot(x - set.lmo(g));
      } catch (const ZeroDirection&) {
        gap = 0.0;
      }
    }
    trace.rows.push_back({k, fx, gap, 1.0 / L, timer.total_ns(), {}});
    if (detail::should_stop(stop, k, gap, started)) break;

    timer.start();
    DenseVector x_next = set.project(x - g / L);
    timer.stop();
    observe(GradientEvent{k, x, x_next});
    x = std::move(x_next);
  }
  return trace;
}

}  // namespace afw
