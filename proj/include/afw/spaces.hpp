#pragma once

#include <concepts>
#include <cstddef>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "afw/factored.hpp"
#include "afw/feasible_sets.hpp"
#include "afw/objectives.hpp"
#include "afw/trace.hpp"

namespace afw {

/// What FW-type solvers need from a problem: objective access, an LMO over
/// the feasible set, convex combinations of points, and the pairing between
/// gradients (duals) and points.
template <class S>
concept IterateSpace = requires(const S& s, const typename S::Point& x,
                                const typename S::Dual& g, double delta) {
  typename S::Point;
  typename S::Dual;
  { s.value(x) } -> std::convertible_to<double>;
  { s.gradient(x) } -> std::convertible_to<typename S::Dual>;
  { s.lmo(g) } -> std::convertible_to<typename S::Point>;
  { s.combine(x, x, delta) } -> std::convertible_to<typename S::Point>;
  { s.combine_dual(g, g, delta) } -> std::convertible_to<typename S::Dual>;
  { s.zero_dual() } -> std::convertible_to<typename S::Dual>;
  { s.is_zero(g) } -> std::convertible_to<bool>;
  { s.dot(g, x) } -> std::convertible_to<double>;
  { s.dot_diff(g, x, x) } -> std::convertible_to<double>;
  { s.distance_sq(x, x) } -> std::convertible_to<double>;
  { s.contains(x) } -> std::convertible_to<bool>;
  { s.smoothness() } -> std::convertible_to<double>;
  { s.diameter() } -> std::convertible_to<double>;
};

/// (1 - delta) a + delta b. Solvers and identity checks share this exact
/// expression so re-evaluation is bitwise reproducible.
inline DenseVector convex_combination(const DenseVector& a, const DenseVector& b, double delta) {
  return (1.0 - delta) * a + delta * b;
}

/// Inner products and combinations in R^d.
struct EuclideanOps {
  static DenseVector combine(const DenseVector& a, const DenseVector& b, double delta) {
    return convex_combination(a, b, delta);
  }
  static DenseVector combine_dual(const DenseVector& a, const DenseVector& b, double delta) {
    return convex_combination(a, b, delta);
  }
  static bool is_zero(const DenseVector& g) { return (g.array() == 0.0).all(); }
  static double dot(const DenseVector& g, const DenseVector& x) { return g.dot(x); }
  /// <g, a - b>
  static double dot_diff(const DenseVector& g, const DenseVector& a, const DenseVector& b) {
    return g.dot(a - b);
  }
  static double distance_sq(const DenseVector& a, const DenseVector& b) {
    return (a - b).squaredNorm();
  }
};

/// Dense-vector problem: an Objective restricted to a FeasibleSet.
class VectorSpace : public EuclideanOps {
 public:
  using Point = DenseVector;
  using Dual = DenseVector;

  VectorSpace(Objective objective, FeasibleSet set)
      : objective_(std::move(objective)), set_(std::move(set)) {
    if (objective_.dim() != set_.dim()) {
      throw DimensionMismatch("objective and feasible set dimensions differ");
    }
  }

  const Objective& objective() const { return objective_; }
  const FeasibleSet& set() const { return set_; }

  double value(const Point& x) const { return objective_.value(x); }
  Dual gradient(const Point& x) const { return objective_.gradient(x); }
  Point lmo(const Dual& direction) const { return set_.lmo(direction); }
  Dual zero_dual() const { return DenseVector::Zero(objective_.dim()); }
  bool contains(const Point& x) const { return set_.contains(x); }
  double smoothness() const { return objective_.smoothness(); }
  double diameter() const { return set_.diameter(); }
  std::string describe() const { return set_.describe(); }

 private:
  Objective objective_;
  FeasibleSet set_;
};

/// Matrix completion over a nuclear-norm ball with factored iterates.
///
/// Points are FactoredMatrix (rank <= number of atoms), duals are matrices
/// supported on the observation mask. The loss only touches masked entries,
/// so nothing of size rows * cols is ever formed.
class NuclearSpace {
 public:
  using Point = FactoredMatrix;
  using Dual = MaskedMatrix;

  NuclearSpace(const MatCompProblem& problem, double radius, PowerOptions power = {})
      : mask_(ObservationMask::from(problem.observed)), radius_(radius), power_(power) {
    detail::require_radius(radius);
    observed_ = DenseVector(static_cast<Index>(mask_->size()));
    Index i = 0;
    for (const auto& e : problem.observed.entries()) observed_[i++] = e.value;
    initial_direction_ = problem.observed;
  }

  double radius() const { return radius_; }
  const std::shared_ptr<const ObservationMask>& mask() const { return mask_; }
  const DenseVector& observed_values() const { return observed_; }

  double value(const Point& x) const { return 0.5 * (x.on_mask() - observed_).squaredNorm(); }

  Dual gradient(const Point& x) const { return MaskedMatrix(mask_, x.on_mask() - observed_); }

  Point lmo(const Dual& direction) const { return lmo_with_start(direction, nullptr); }

  /// Same oracle, with power iteration started from the previous vertex's
  /// right factor. Successive directions differ little, so this saves most
  /// of the sweeps.
  Point lmo(const Dual& direction, const Point& previous) const {
    const auto& atoms = previous.atoms();
    return lmo_with_start(direction, atoms.empty() ? nullptr : &atoms.back().factors->right);
  }

  static Point combine(const Point& a, const Point& b, double delta) {
    return afw::combine(a, b, delta);
  }

  static Dual combine_dual(const Dual& a, const Dual& b, double delta) {
    return MaskedMatrix(a.mask_ptr(), convex_combination(a.values(), b.values(), delta));
  }

  Dual zero_dual() const {
    return MaskedMatrix(mask_, DenseVector::Zero(static_cast<Index>(mask_->size())));
  }

  static bool is_zero(const Dual& g) { return g.is_zero(); }

  /// <G, X> for G supported on the mask only needs X on the mask.
  static double dot(const Dual& g, const Point& x) { return g.values().dot(x.on_mask()); }

  static double dot_diff(const Dual& g, const Point& a, const Point& b) {
    return g.values().dot(a.on_mask() - b.on_mask());
  }

  static double distance_sq(const Point& a, const Point& b) { return frobenius_distance_sq(a, b); }

  bool contains(const Point& x) const {
    return x.on_mask().allFinite() && x.nuclear_norm_bound() <= radius_ + kContainsSlack;
  }

  double smoothness() const { return 1.0; }
  double diameter() const { return 2.0 * radius_; }

  /// X0 = R p q^T from the leading singular pair of the observed matrix.
  Point initial_point() const {
    const SingularTriplet top =
        top_singular_pair(initial_direction_, power_.tol, power_.max_iter, power_.seed);
    return FactoredMatrix::rank_one(mask_, radius_, top.left, top.right);
  }

  RankSample rank_sample(std::int64_t k, const Point& x) const {
    return RankSample{k, x.numerical_rank(), x.consolidated_atom_count()};
  }

  std::string describe() const {
    std::ostringstream out;
    out.precision(17);
    out << "nuclear_ball(R=" << radius_ << ",m=" << mask_->rows << ",n=" << mask_->cols << ")";
    return out.str();
  }

 private:
  Point lmo_with_start(const Dual& direction, const DenseVector* start) const {
    const RankOne atom = lmo_nuclear(direction.to_sparse(), radius_, power_.tol, power_.seed,
                                     power_.max_iter, start);
    return FactoredMatrix::rank_one(mask_, atom.scale, atom.left, atom.right);
  }

  std::shared_ptr<const ObservationMask> mask_;
  DenseVector observed_;
  SparseMatrix initial_direction_;
  double radius_;
  PowerOptions power_;
};

static_assert(IterateSpace<VectorSpace>);
static_assert(IterateSpace<NuclearSpace>);

}  // namespace afw
