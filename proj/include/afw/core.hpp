#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "afw/errors.hpp"

namespace afw {

using Index = Eigen::Index;
using DenseVector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

using Rng = std::mt19937_64;

inline Rng make_rng(Seed seed) { return Rng(seed.value); }

/// Derives an independent stream from a base seed; used to give each
/// sub-experiment its own deterministic generator.
inline Seed derive_seed(Seed base, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = base.value + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return Seed{z ^ (z >> 31)};
}

inline DenseVector random_gaussian(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseVector out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

inline DenseVector random_unit_vector(Index n, Rng& rng) {
  DenseVector out = random_gaussian(n, rng);
  double norm = out.norm();
  while (norm == 0.0) {
    out = random_gaussian(n, rng);
    norm = out.norm();
  }
  return out / norm;
}

inline bool all_finite(const DenseVector& v) { return v.allFinite(); }

/// Sparse matrix with validated, duplicate-free coordinates.
///
/// Entries are kept sorted in row-major order next to a compressed Eigen
/// copy used for products. Immutable after construction.
class SparseMatrix {
 public:
  struct Entry {
    Index row;
    Index col;
    double value;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  SparseMatrix() = default;

  SparseMatrix(Index rows, Index cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows <= 0 || cols <= 0) {
      throw InvalidArgument("sparse matrix dimensions must be positive");
    }
    for (const auto& e : entries_) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
        throw InvalidArgument("sparse entry (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ") out of bounds");
      }
      if (!std::isfinite(e.value)) throw InvalidArgument("sparse entry value is not finite");
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].row == entries_[i - 1].row && entries_[i].col == entries_[i - 1].col) {
        throw InvalidArgument("duplicate sparse coordinate (" + std::to_string(entries_[i].row) +
                              ", " + std::to_string(entries_[i].col) + ")");
      }
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(entries_.size());
    for (const auto& e : entries_) triplets.emplace_back(e.row, e.col, e.value);
    compressed_.resize(rows, cols);
    compressed_.setFromTriplets(triplets.begin(), triplets.end());
    compressed_.makeCompressed();
  }

  static SparseMatrix from_dense(const DenseMatrix& m) {
    std::vector<Entry> entries;
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (m(i, j) != 0.0) entries.push_back({i, j, m(i, j)});
      }
    }
    return SparseMatrix(m.rows(), m.cols(), std::move(entries));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& eigen() const { return compressed_; }

  bool is_zero() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const Entry& e) { return e.value == 0.0; });
  }

  DenseVector multiply(const DenseVector& x) const {
    if (x.size() != cols_) throw DimensionMismatch("sparse multiply: vector has wrong length");
    return compressed_ * x;
  }

  DenseVector multiply_transpose(const DenseVector& y) const {
    if (y.size() != rows_) {
      throw DimensionMismatch("sparse transpose multiply: vector has wrong length");
    }
    return compressed_.transpose() * y;
  }

  DenseMatrix to_dense() const { return DenseMatrix(compressed_); }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Entry> entries_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> compressed_;
};

struct EigenPair {
  double value = 0.0;
  DenseVector vector;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // ||Mv - value v||
};

namespace detail {

template <class LinearOperator>
EigenPair power_sweeps(LinearOperator& apply, DenseVector v, DenseVector w, double tol,
                       int max_iter) {
  EigenPair pair;
  for (int it = 1; it <= max_iter; ++it) {
    const double w_norm = w.norm();
    if (w_norm == 0.0) {
      // v fell into the kernel; report what we have
      pair.value = 0.0;
      pair.vector = v;
      pair.iterations = it;
      pair.residual = 0.0;
      pair.converged = false;
      return pair;
    }
    v = w / w_norm;
    w = apply(v);
    const double lambda = v.dot(w);
    const double residual = (w - lambda * v).norm();
    pair.value = lambda;
    pair.vector = v;
    pair.iterations = it;
    pair.residual = residual;
    if (lambda > 0.0 && residual <= tol * lambda) {
      pair.converged = true;
      return pair;
    }
  }
  return pair;
}

}  // namespace detail

/// Dominant eigenpair of a symmetric positive semidefinite operator.
///
/// `apply` maps a DenseVector of length `dim` to one of the same length.
/// Stops when ||Mv - lambda v|| <= tol * lambda; if the first start never
/// gets there, one restart from a fresh seeded direction is attempted and the
/// better pair is returned with `converged` reporting the outcome.
///
/// A nonzero `warm_start` replaces the first random start; it does not count
/// as one of the two independent starts of the zero-operator check.
template <class LinearOperator>
EigenPair power_iteration(LinearOperator&& apply, Index dim, double tol, int max_iter, Seed seed,
                          const DenseVector* warm_start = nullptr) {
  if (dim <= 0) throw InvalidArgument("power_iteration: dim must be positive");
  if (!(tol > 0.0)) throw InvalidArgument("power_iteration: tol must be positive");
  if (max_iter < 1) throw InvalidArgument("power_iteration: max_iter must be >= 1");

  Rng rng = make_rng(seed);
  auto start = [&]() -> std::pair<DenseVector, DenseVector> {
    DenseVector v = random_unit_vector(dim, rng);
    DenseVector w = apply(v);
    return {std::move(v), std::move(w)};
  };

  DenseVector v;
  DenseVector w;
  if (warm_start && warm_start->size() == dim && warm_start->norm() > 0.0) {
    v = warm_start->normalized();
    w = apply(v);
  }
  if (w.size() == 0 || w.norm() == 0.0) {
    std::tie(v, w) = start();
    if (w.norm() == 0.0) {
      std::tie(v, w) = start();
      if (w.norm() == 0.0) throw ZeroOperator();
    }
  }
  EigenPair best = detail::power_sweeps(apply, std::move(v), std::move(w), tol, max_iter);
  if (best.converged) return best;

  auto [v2, w2] = start();
  if (w2.norm() == 0.0) return best;
  EigenPair second = detail::power_sweeps(apply, std::move(v2), std::move(w2), tol, max_iter);
  second.iterations += best.iterations;
  if (second.converged || second.value > best.value) return second;
  best.iterations = second.iterations;
  return best;
}

struct SingularTriplet {
  double sigma = 0.0;
  DenseVector left;   // p
  DenseVector right;  // q
  bool converged = false;
};

/// Flips (p, q) together so that the largest-magnitude entry of p is positive
/// (first such index on ties).
inline void canonicalize_sign(DenseVector& p, DenseVector& q) {
  Index arg = 0;
  double best = -1.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (std::abs(p[i]) > best) {
      best = std::abs(p[i]);
      arg = i;
    }
  }
  if (p.size() > 0 && p[arg] < 0.0) {
    p = -p;
    q = -q;
  }
}

/// Leading singular triplet of G via power iteration on G^T G. G is never
/// densified.
/// `warm_start`, if given, is a guess for the right vector q.
inline SingularTriplet top_singular_pair(const SparseMatrix& g, double tol, int max_iter,
                                         Seed seed, const DenseVector* warm_start = nullptr) {
  if (g.nnz() == 0 || g.is_zero()) throw ZeroOperator();
  auto gram = [&g](const DenseVector& x) -> DenseVector {
    return g.multiply_transpose(g.multiply(x));
  };
  EigenPair pair = power_iteration(gram, g.cols(), tol, max_iter, seed, warm_start);
  DenseVector q = pair.vector;
  DenseVector gq = g.multiply(q);
  const double sigma = gq.norm();
  if (sigma == 0.0) throw ZeroOperator();
  SingularTriplet out;
  out.sigma = sigma;
  out.left = gq / sigma;
  out.right = q / q.norm();
  out.converged = pair.converged;
  canonicalize_sign(out.left, out.right);
  return out;
}

}  // namespace afw
