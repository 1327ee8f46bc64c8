#include <gtest/gtest.h>

#include "afw/spaces.hpp"
#include "afw/synthetic.hpp"
#include "test_support.hpp"

using namespace afw;

namespace {

std::shared_ptr<const ObservationMask> full_mask(Index m, Index n) {
  std::vector<SparseMatrix::Entry> e;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) e.push_back({i, j, 1.0});
  }
  return ObservationMask::from(SparseMatrix(m, n, e));
}

}  // namespace

TEST(FactoredMatrix, RankOneMatchesDense) {
  afw_test::Gen gen(1);
  const auto mask = full_mask(4, 3);
  const DenseVector p = gen.unit(4);
  const DenseVector q = gen.unit(3);
  const auto x = FactoredMatrix::rank_one(mask, -2.0, p, q);
  const DenseMatrix d = -2.0 * p * q.transpose();
  EXPECT_LE((x.to_dense() - d).cwiseAbs().maxCoeff(), 1e-15);
  for (std::size_t i = 0; i < mask->size(); ++i) {
    EXPECT_DOUBLE_EQ(x.on_mask()[static_cast<Index>(i)], d(mask->row[i], mask->col[i]));
  }
  EXPECT_EQ(x.nuclear_norm_bound(), 2.0);
  EXPECT_EQ(x.numerical_rank(), 1);
  EXPECT_THROW(FactoredMatrix::rank_one(mask, 1.0, gen.unit(3), q), DimensionMismatch);
}

TEST(FactoredMatrix, CombineMatchesDenseAndMergesSharedAtoms) {
  afw_test::Gen gen(2);
  const auto mask = full_mask(5, 4);
  const auto a = FactoredMatrix::rank_one(mask, 1.0, gen.unit(5), gen.unit(4));
  const auto b = FactoredMatrix::rank_one(mask, -1.0, gen.unit(5), gen.unit(4));
  const auto ab = combine(a, b, 0.25);
  EXPECT_LE((ab.to_dense() - (0.75 * a.to_dense() + 0.25 * b.to_dense())).cwiseAbs().maxCoeff(),
            1e-14);
  EXPECT_EQ(ab.atoms().size(), 2u);
  const auto again = combine(ab, b, 0.5);  // b's atom is shared: merged, not appended
  EXPECT_EQ(again.atoms().size(), 2u);
  EXPECT_LE((again.to_dense() - (0.5 * ab.to_dense() + 0.5 * b.to_dense())).cwiseAbs().maxCoeff(),
            1e-14);
  EXPECT_NEAR(again.nuclear_norm_bound(), 1.0, 1e-15);
}

TEST(FactoredMatrix, FrobeniusProductsMatchDense) {
  afw_test::Gen gen(3);
  const auto mask = full_mask(4, 4);
  auto x = FactoredMatrix::rank_one(mask, 1.0, gen.unit(4), gen.unit(4));
  auto y = FactoredMatrix::rank_one(mask, 0.5, gen.unit(4), gen.unit(4));
  for (int k = 0; k < 5; ++k) {
    x = combine(x, FactoredMatrix::rank_one(mask, 1.0, gen.unit(4), gen.unit(4)), 0.3);
  }
  const DenseMatrix dx = x.to_dense();
  const DenseMatrix dy = y.to_dense();
  EXPECT_NEAR(frobenius_dot(x, y), (dx.array() * dy.array()).sum(), 1e-13);
  EXPECT_NEAR(frobenius_distance_sq(x, y), (dx - dy).squaredNorm(), 1e-13);
  EXPECT_EQ(frobenius_distance_sq(x, x), 0.0);
}

TEST(FactoredMatrix, RankCountsIndependentAtoms) {
  afw_test::Gen gen(4);
  const auto mask = full_mask(6, 5);
  const DenseVector p = gen.unit(6);
  const DenseVector q = gen.unit(5);
  auto x = FactoredMatrix::rank_one(mask, 1.0, p, q);
  // same outer product through distinct factor storage
  x = combine(x, FactoredMatrix::rank_one(mask, 1.0, p, q), 0.5);
  x = combine(x, FactoredMatrix::rank_one(mask, 1.0, -p, -q), 0.5);
  EXPECT_EQ(x.atoms().size(), 3u);
  EXPECT_EQ(x.consolidated_atom_count(), 1u);
  EXPECT_EQ(x.numerical_rank(), 1);
  x = combine(x, FactoredMatrix::rank_one(mask, 1.0, gen.unit(6), gen.unit(5)), 0.5);
  EXPECT_EQ(x.numerical_rank(), 2);
  EXPECT_EQ(x.consolidated_atom_count(), 2u);
}

TEST(MaskedMatrix, SparseViewDropsZeros) {
  const auto mask = ObservationMask::from(SparseMatrix(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}));
  DenseVector vals(2);
  vals << 0.0, 3.0;
  const MaskedMatrix m(mask, vals);
  EXPECT_EQ(m.to_sparse().nnz(), 1u);
  EXPECT_FALSE(m.is_zero());
  EXPECT_TRUE(MaskedMatrix(mask, DenseVector::Zero(2)).is_zero());
  EXPECT_THROW(MaskedMatrix(mask, DenseVector::Zero(3)), DimensionMismatch);
}

TEST(NuclearSpace, AgreesWithDenseObjective) {
  const auto inst = random_low_rank_completion(7, 5, 2, 0.5, Seed{5});
  const NuclearSpace space(inst.problem, 3.0, PowerOptions{1e-12, 1000, Seed{1}});
  const auto f = matcomp_objective(inst.problem);
  const auto x0 = space.initial_point();
  auto flat = [](const DenseMatrix& m) {
    DenseVector v(m.size());
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
    }
    return v;
  };
  EXPECT_NEAR(space.value(x0), f.value(flat(x0.to_dense())), 1e-12);
  const auto g = space.gradient(x0);
  EXPECT_LE((flat(g.to_sparse().to_dense()) - f.gradient(flat(x0.to_dense()))).cwiseAbs().maxCoeff(),
            1e-12);
  EXPECT_TRUE(space.contains(x0));
  EXPECT_NEAR(x0.nuclear_norm_bound(), 3.0, 1e-15);
  const auto v = space.lmo(g);
  EXPECT_NEAR(v.nuclear_norm_bound(), 3.0, 1e-15);
  EXPECT_LE(space.dot(g, v), space.dot(g, x0) + 1e-9);
  EXPECT_EQ(space.describe(), "nuclear_ball(R=3,m=7,n=5)");
}

TEST(VectorSpace, DelegatesToObjectiveAndSet) {
  const auto obj = quadratic_objective(DenseVector::Ones(3), 1.0);
  const VectorSpace space(obj, FeasibleSet::l1_ball(1.0, 3));
  EXPECT_EQ(space.value(DenseVector::Zero(3)), 3.0);
  EXPECT_EQ(space.smoothness(), 2.0);
  EXPECT_EQ(space.diameter(), 2.0);
  DenseVector expected = DenseVector::Zero(3);
  expected[0] = 1.0;
  EXPECT_EQ(space.lmo(space.gradient(DenseVector::Zero(3))), expected);
}
