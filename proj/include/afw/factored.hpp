#pragma once

#include <cmath>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include "afw/core.hpp"

namespace afw {

/// Coordinates of the observed entries K, sorted row-major.
struct ObservationMask {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> row;
  std::vector<Index> col;

  std::size_t size() const { return row.size(); }

  static std::shared_ptr<const ObservationMask> from(const SparseMatrix& a) {
    auto mask = std::make_shared<ObservationMask>();
    mask->rows = a.rows();
    mask->cols = a.cols();
    mask->row.reserve(a.nnz());
    mask->col.reserve(a.nnz());
    for (const auto& e : a.entries()) {
      mask->row.push_back(e.row);
      mask->col.push_back(e.col);
    }
    return mask;
  }
};

/// Matrix supported on an observation mask; the gradient (and the AFW
/// direction theta) of the matrix-completion loss lives here.
class MaskedMatrix {
 public:
  MaskedMatrix() = default;
  MaskedMatrix(std::shared_ptr<const ObservationMask> mask, DenseVector values)
      : mask_(std::move(mask)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != mask_->size()) {
      throw DimensionMismatch("masked matrix: values do not match mask size");
    }
  }

  const ObservationMask& mask() const { return *mask_; }
  const std::shared_ptr<const ObservationMask>& mask_ptr() const { return mask_; }
  const DenseVector& values() const { return values_; }

  bool is_zero() const { return values_.size() == 0 || (values_.array() == 0.0).all(); }

  SparseMatrix to_sparse() const {
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve(mask_->size());
    for (std::size_t i = 0; i < mask_->size(); ++i) {
      const double v = values_[static_cast<Index>(i)];
      if (v != 0.0) entries.push_back({mask_->row[i], mask_->col[i], v});
    }
    return SparseMatrix(mask_->rows, mask_->cols, std::move(entries));
  }

 private:
  std::shared_ptr<const ObservationMask> mask_;
  DenseVector values_;
};

struct AtomFactors {
  DenseVector left;
  DenseVector right;
};

/// weight * left * right^T; atoms sharing a factor pointer are the same
/// outer product and are merged by adding weights.
struct Atom {
  double weight = 0.0;
  std::shared_ptr<const AtomFactors> factors;
};

/// Matrix iterate stored as a weighted list of rank-one atoms with its
/// entries on the observation mask cached. Unit-norm factors make
/// sum |weight| an upper bound on the nuclear norm.
class FactoredMatrix {
 public:
  FactoredMatrix() = default;

  static FactoredMatrix rank_one(std::shared_ptr<const ObservationMask> mask, double weight,
                                 DenseVector left, DenseVector right) {
    if (left.size() != mask->rows || right.size() != mask->cols) {
      throw DimensionMismatch("rank-one atom does not match mask shape");
    }
    FactoredMatrix out;
    out.mask_ = std::move(mask);
    auto factors = std::make_shared<const AtomFactors>(AtomFactors{std::move(left), std::move(right)});
    out.on_mask_ = DenseVector(static_cast<Index>(out.mask_->size()));
    for (std::size_t i = 0; i < out.mask_->size(); ++i) {
      out.on_mask_[static_cast<Index>(i)] =
          weight * factors->left[out.mask_->row[i]] * factors->right[out.mask_->col[i]];
    }
    out.atoms_.push_back(Atom{weight, std::move(factors)});
    return out;
  }

  Index rows() const { return mask_->rows; }
  Index cols() const { return mask_->cols; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const DenseVector& on_mask() const { return on_mask_; }
  const std::shared_ptr<const ObservationMask>& mask_ptr() const { return mask_; }

  /// sum |weight|: an upper bound on the nuclear norm.
  double nuclear_norm_bound() const {
    double total = 0.0;
    for (const auto& a : atoms_) total += std::abs(a.weight);
    return total;
  }

  DenseMatrix to_dense() const {
    DenseMatrix m = DenseMatrix::Zero(rows(), cols());
    for (const auto& a : atoms_) m += a.weight * a.factors->left * a.factors->right.transpose();
    return m;
  }

  /// (1 - delta) a + delta b, merging atoms that share factors.
  friend FactoredMatrix combine(const FactoredMatrix& a, const FactoredMatrix& b, double delta) {
    FactoredMatrix out;
    out.mask_ = a.mask_;
    out.on_mask_ = (1.0 - delta) * a.on_mask_ + delta * b.on_mask_;
    out.atoms_.reserve(a.atoms_.size() + b.atoms_.size());
    if (b.atoms_.size() == 1) {
      // common case: b is a fresh LMO vertex
      const Atom& fresh = b.atoms_.front();
      bool merged = false;
      for (const auto& atom : a.atoms_) {
        out.atoms_.push_back(Atom{(1.0 - delta) * atom.weight, atom.factors});
        if (atom.factors == fresh.factors) {
          out.atoms_.back().weight += delta * fresh.weight;
          merged = true;
        }
      }
      if (!merged) out.atoms_.push_back(Atom{delta * fresh.weight, fresh.factors});
      std::erase_if(out.atoms_, [](const Atom& atom) { return atom.weight == 0.0; });
      return out;
    }
    std::unordered_map<const AtomFactors*, std::size_t> index;
    index.reserve(a.atoms_.size() + b.atoms_.size());
    auto add = [&](const Atom& atom, double scale) {
      const double w = scale * atom.weight;
      auto [it, inserted] = index.try_emplace(atom.factors.get(), out.atoms_.size());
      if (inserted) {
        out.atoms_.push_back(Atom{w, atom.factors});
      } else {
        out.atoms_[it->second].weight += w;
      }
    };
    for (const auto& atom : a.atoms_) add(atom, 1.0 - delta);
    for (const auto& atom : b.atoms_) add(atom, delta);
    std::erase_if(out.atoms_, [](const Atom& atom) { return atom.weight == 0.0; });
    return out;
  }

  /// Frobenius inner product computed from the factors.
  friend double frobenius_dot(const FactoredMatrix& a, const FactoredMatrix& b) {
    double total = 0.0;
    for (const auto& x : a.atoms_) {
      for (const auto& y : b.atoms_) {
        total += x.weight * y.weight * x.factors->left.dot(y.factors->left) *
                 x.factors->right.dot(y.factors->right);
      }
    }
    return total;
  }

  /// ||a - b||_F^2; shared atoms cancel before any products are formed.
  friend double frobenius_distance_sq(const FactoredMatrix& a, const FactoredMatrix& b) {
    FactoredMatrix diff;
    diff.mask_ = a.mask_;
    std::unordered_map<const AtomFactors*, std::size_t> index;
    auto add = [&](const Atom& atom, double scale) {
      auto [it, inserted] = index.try_emplace(atom.factors.get(), diff.atoms_.size());
      if (inserted) {
        diff.atoms_.push_back(Atom{scale * atom.weight, atom.factors});
      } else {
        diff.atoms_[it->second].weight += scale * atom.weight;
      }
    };
    for (const auto& atom : a.atoms_) add(atom, 1.0);
    for (const auto& atom : b.atoms_) add(atom, -1.0);
    std::erase_if(diff.atoms_, [](const Atom& atom) { return atom.weight == 0.0; });
    return std::max(frobenius_dot(diff, diff), 0.0);
  }

  /// Number of atoms after merging numerically identical outer products.
  std::size_t consolidated_atom_count(double tol = 1e-12) const {
    std::vector<const Atom*> kept;
    for (const auto& atom : atoms_) {
      bool merged = false;
      for (const Atom* k : kept) {
        const auto& f = *atom.factors;
        const auto& g = *k->factors;
        const bool same = (f.left - g.left).cwiseAbs().maxCoeff() <= tol &&
                          (f.right - g.right).cwiseAbs().maxCoeff() <= tol;
        const bool flipped = (f.left + g.left).cwiseAbs().maxCoeff() <= tol &&
                             (f.right + g.right).cwiseAbs().maxCoeff() <= tol;
        if (same || flipped) {
          merged = true;
          break;
        }
      }
      if (!merged) kept.push_back(&atom);
    }
    return kept.size();
  }

  /// Numerical rank: thin QR of the stacked left and right factors, then an
  /// SVD of the small weighted core. Singular values above rel_tol * sigma_max
  /// count.
  Index numerical_rank(double rel_tol = 1e-10) const {
    const Index r = static_cast<Index>(atoms_.size());
    if (r == 0) return 0;
    DenseMatrix left(rows(), r);
    DenseMatrix right(cols(), r);
    for (Index k = 0; k < r; ++k) {
      left.col(k) = atoms_[static_cast<std::size_t>(k)].weight *
                    atoms_[static_cast<std::size_t>(k)].factors->left;
      right.col(k) = atoms_[static_cast<std::size_t>(k)].factors->right;
    }
    const Index kl = std::min(rows(), r);
    const Index kr = std::min(cols(), r);
    Eigen::HouseholderQR<DenseMatrix> ql(left);
    Eigen::HouseholderQR<DenseMatrix> qr(right);
    const DenseMatrix rl = ql.matrixQR().topRows(kl).triangularView<Eigen::Upper>();
    const DenseMatrix rr = qr.matrixQR().topRows(kr).triangularView<Eigen::Upper>();
    const DenseMatrix core = rl * rr.transpose();
    Eigen::JacobiSVD<DenseMatrix> svd(core);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s[0] == 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < s.size(); ++i) {
      if (s[i] > rel_tol * s[0]) ++rank;
    }
    return rank;
  }

 private:
  std::shared_ptr<const ObservationMask> mask_;
  std::vector<Atom> atoms_;
  DenseVector on_mask_;
};

FactoredMatrix combine(const FactoredMatrix& a, const FactoredMatrix& b, double delta);
double frobenius_dot(const FactoredMatrix& a, const FactoredMatrix& b);
double frobenius_distance_sq(const FactoredMatrix& a, const FactoredMatrix& b);

}  // namespace afw
