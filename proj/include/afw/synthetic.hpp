#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "afw/core.hpp"
#include "afw/feasible_sets.hpp"
#include "afw/objectives.hpp"

namespace afw {

/// c = norm * (seeded unit vector)
inline DenseVector random_center(Index dim, double norm, Seed seed) {
  Rng rng = make_rng(seed);
  return norm * random_unit_vector(dim, rng);
}

/// Gaussian direction scaled to set-norm R * u with u ~ U(0, 1).
inline DenseVector random_feasible_point(const FeasibleSet& set, Rng& rng) {
  DenseVector g = random_gaussian(set.dim(), rng);
  double n = set.norm(g);
  while (n == 0.0) {
    g = random_gaussian(set.dim(), rng);
    n = set.norm(g);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return (set.radius() * unit(rng) / n) * g;
}

/// Dense Gaussian features, labels from a planted separator with 10% flips.
inline LogisticProblem random_logistic_problem(Index samples, Index features, Seed seed) {
  if (samples < 1 || features < 1) throw InvalidArgument("logistic problem needs n, d >= 1");
  Rng rng = make_rng(seed);
  const DenseVector w = random_unit_vector(features, rng);
  std::vector<SparseMatrix::Entry> entries;
  std::vector<double> labels;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Index i = 0; i < samples; ++i) {
    const DenseVector a = random_gaussian(features, rng);
    for (Index j = 0; j < features; ++j) entries.push_back({i, j, a[j]});
    double b = a.dot(w) >= 0.0 ? 1.0 : -1.0;
    if (unit(rng) < 0.1) b = -b;
    labels.push_back(b);
  }
  return LogisticProblem(SparseMatrix(samples, features, std::move(entries)), std::move(labels));
}

struct LowRankInstance {
  MatCompProblem problem;
  DenseMatrix truth;
  double nuclear_norm = 0.0;
};

/// M = U V^T / sqrt(rank) with Gaussian factors; exactly
/// round(fraction * rows * cols) entries observed, chosen uniformly.
inline LowRankInstance random_low_rank_completion(Index rows, Index cols, Index rank,
                                                  double fraction, Seed seed) {
  if (rows < 1 || cols < 1 || rank < 1) throw InvalidArgument("matrix shape and rank must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("observed fraction must lie in (0, 1]");
  }
  Rng rng = make_rng(seed);
  DenseMatrix u(rows, rank);
  DenseMatrix v(cols, rank);
  for (Index j = 0; j < rank; ++j) u.col(j) = random_gaussian(rows, rng);
  for (Index j = 0; j < rank; ++j) v.col(j) = random_gaussian(cols, rng);
  const DenseMatrix truth = u * v.transpose() / std::sqrt(static_cast<double>(rank));

  std::vector<Index> cells(static_cast<std::size_t>(rows * cols));
  std::iota(cells.begin(), cells.end(), Index{0});
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto observed = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(cells.size()))));
  std::vector<SparseMatrix::Entry> entries;
  entries.reserve(observed);
  for (std::size_t i = 0; i < observed; ++i) {
    const Index r = cells[i] / cols;
    const Index c = cells[i] % cols;
    entries.push_back({r, c, truth(r, c)});
  }
  return LowRankInstance{MatCompProblem(SparseMatrix(rows, cols, std::move(entries))), truth,
                         nuclear_norm(truth)};
}

}  // namespace afw
