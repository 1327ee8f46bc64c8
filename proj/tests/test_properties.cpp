#include <gtest/gtest.h>

#include <sstream>

#include "afw/data_io.hpp"
#include "afw/diagnostics.hpp"
#include "afw/solvers.hpp"
#include "afw/synthetic.hpp"
#include "test_support.hpp"

using namespace afw;

namespace {

using VecEvent = StepEvent<DenseVector, DenseVector>;

StoppingRule iters(std::int64_t k) {
  StoppingRule s;
  s.max_iters = k;
  return s;
}

/// A random instance with a known optimum: quadratic on an l2 ball, center
/// either inside (f* = 0) or outside (x* = radial projection).
struct QuadraticOnBall {
  Objective f;
  FeasibleSet set;
  DenseVector x0;
  double f_star;
};

QuadraticOnBall random_quadratic_on_ball(afw_test::Gen& g) {
  const Index d = g.integer(2, 30);
  const double radius = g.uniform(0.5, 3.0);
  const double scale = g.uniform(0.2, 5.0);
  const bool active = g.integer(0, 1) == 1;
  const double center_norm = active ? radius * g.uniform(1.2, 3.0) : radius * g.uniform(0.0, 0.9);
  const DenseVector c = center_norm * g.unit(d);
  const DenseVector x_star = active ? DenseVector(radius * c / c.norm()) : c;
  auto f = quadratic_objective(c, scale);
  const double f_star = f.value(x_star);
  return {f, FeasibleSet::l2_ball(radius, d), g.in_lp_ball(d, 2.0, radius, false), f_star};
}

FeasibleSet random_ball(afw_test::Gen& g, Index d) {
  const double r = g.uniform(0.5, 3.0);
  switch (g.integer(0, 2)) {
    case 0:
      return FeasibleSet::l2_ball(r, d);
    case 1:
      return FeasibleSet::l1_ball(r, d);
    default:
      return FeasibleSet::lp_ball(r, g.uniform(1.2, 5.0), d);
  }
}

DenseVector feasible_start(afw_test::Gen& g, const FeasibleSet& set, Index d) {
  // a shrunken LMO vertex is feasible for every ball
  return g.uniform(0.0, 0.99) * set.lmo(g.vector(d));
}

}  // namespace

TEST(ObjectiveProperty, Convexity) {
  afw_test::for_all(11, 100, [](afw_test::Gen& g, int c) {
    const Index d = g.integer(1, 12);
    Objective f = c % 3 == 0   ? quadratic_objective(g.vector(d), g.uniform(0.1, 3.0))
                  : c % 3 == 1 ? diagonal_quadratic_objective(
                                     (g.vector(d).array().abs() + 0.1).matrix(), g.vector(d))
                               : logistic_objective(random_logistic_problem(
                                     g.integer(3, 20), d, Seed{static_cast<std::uint64_t>(c)}));
    const DenseVector x = g.vector(d, 2.0);
    const DenseVector y = g.vector(d, 2.0);
    const double a = g.uniform(0.0, 1.0);
    EXPECT_LE(f.value(a * x + (1 - a) * y), a * f.value(x) + (1 - a) * f.value(y) + 1e-9);
  });
}

TEST(ObjectiveProperty, MatrixCompletionConvexity) {
  afw_test::for_all(12, 30, [](afw_test::Gen& g, int c) {
    const auto inst =
        random_low_rank_completion(g.integer(2, 8), g.integer(2, 8), 1, 0.5,
                                   Seed{static_cast<std::uint64_t>(c)});
    const auto f = matcomp_objective(inst.problem);
    const DenseVector x = g.vector(f.dim());
    const DenseVector y = g.vector(f.dim());
    const double a = g.uniform(0.0, 1.0);
    EXPECT_LE(f.value(a * x + (1 - a) * y), a * f.value(x) + (1 - a) * f.value(y) + 1e-9);
  });
}

TEST(SolverProperty, FrankWolfeIteratesStayFeasible) {
  afw_test::for_all(13, 40, [](afw_test::Gen& g, int c) {
    const Index d = g.integer(2, 15);
    const auto set = random_ball(g, d);
    const auto f = c % 2 ? quadratic_objective(g.vector(d, 3.0), 1.0)
                         : logistic_objective(random_logistic_problem(
                               20, d, Seed{static_cast<std::uint64_t>(c)}));
    const DenseVector x0 = feasible_start(g, set, d);
    bool all_in = true;
    auto observe = [&](const VecEvent& e) {
      all_in = all_in && set.contains(e.x) && set.contains(e.y) && set.contains(e.v_next) &&
               set.contains(e.x_next);
    };
    run_afw(VectorSpace(f, set), x0, Schedule::afw_shifted(), iters(300), {}, observe);
    run_fw(VectorSpace(f, set), x0, Schedule::fw_classic(), iters(300), {}, observe);
    EXPECT_TRUE(all_in) << set.describe();
  });
}

TEST(SolverProperty, AfwConvexCombinationIsExact) {
  afw_test::for_all(14, 30, [](afw_test::Gen& g, int) {
    const Index d = g.integer(2, 15);
    const auto set = random_ball(g, d);
    const auto f = quadratic_objective(g.vector(d, 3.0), g.uniform(0.5, 2.0));
    std::size_t mismatches = 0;
    auto observe = [&](const VecEvent& e) {
      const DenseVector again = (1.0 - e.delta) * e.x + e.delta * e.v_next;
      for (Index i = 0; i < d; ++i) {
        if (again[i] != e.x_next[i]) ++mismatches;
      }
    };
    run_afw(VectorSpace(f, set), feasible_start(g, set, d), Schedule::afw_shifted(), iters(200),
            {}, observe);
    EXPECT_EQ(mismatches, 0u);
  });
}

TEST(SolverProperty, ThetaIsWeightedAverageOfGradients) {
  afw_test::for_all(15, 10, [](afw_test::Gen& g, int) {
    const Index d = g.integer(2, 10);
    const auto set = random_ball(g, d);
    const auto f = quadratic_objective(g.vector(d, 3.0), 1.0);
    std::vector<DenseVector> grads;
    DenseVector theta;
    auto observe = [&](const VecEvent& e) {
      grads.push_back(e.grad_y);
      theta = e.theta;
    };
    run_afw(VectorSpace(f, set), feasible_start(g, set, d), Schedule::afw_shifted(), iters(101), {},
            observe);
    ASSERT_EQ(grads.size(), 101u);
    DenseVector avg = DenseVector::Zero(d);
    for (int tau = 0; tau <= 100; ++tau) {
      avg += 2.0 * (tau + 2.0) / (102.0 * 103.0) * grads[static_cast<std::size_t>(tau)];
    }
    EXPECT_LE((theta - avg).norm(), 1e-10);
  });
}

TEST(SolverProperty, LambdaClosedFormAndRecursion) {
  afw_test::Gen g(16);
  auto inst = random_quadratic_on_ball(g);
  TraceOptions opts;
  opts.diagnostics = true;
  const auto t = run_afw(inst.f, inst.set, inst.x0, Schedule::afw_shifted(), iters(10000), opts);
  const auto lambda = t.column_values(columns::kLambda);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double k = static_cast<double>(t.rows[i].k);
    EXPECT_NEAR(lambda[i], 2.0 / ((k + 1) * (k + 2)), 1e-14);
    if (i > 0) {
      EXPECT_NEAR(lambda[i], lambda[i - 1] * (1.0 - 2.0 / (k + 2)), 1e-14);
    }
  }
}

TEST(SolverProperty, PointwiseBoundWithKnownOptimum) {
  afw_test::for_all(17, 25, [](afw_test::Gen& g, int) {
    const auto inst = random_quadratic_on_ball(g);
    const auto t =
        run_afw(inst.f, inst.set, inst.x0, Schedule::afw_shifted(), iters(2000), TraceOptions{});
    const double L = inst.f.smoothness();
    const double D = inst.set.diameter();
    const double gap0 = t.rows[0].f_value - inst.f_star;
    for (const auto& r : t.rows) {
      const double k = static_cast<double>(r.k);
      const double bound = 2 * gap0 / ((k + 1) * (k + 2)) + 2 * L * D * D / (k + 2);
      ASSERT_LE(r.f_value - inst.f_star, bound * (1 + 1e-9)) << "k = " << r.k;
    }
  });
}

TEST(SolverProperty, Determinism) {
  afw_test::for_all(18, 10, [](afw_test::Gen& g, int) {
    const auto inst = random_quadratic_on_ball(g);
    TraceOptions opts;
    opts.diagnostics = true;
    const auto a = run_afw(inst.f, inst.set, inst.x0, Schedule::afw_shifted(), iters(500), opts);
    const auto b = run_afw(inst.f, inst.set, inst.x0, Schedule::afw_shifted(), iters(500), opts);
    std::ostringstream sa, sb;
    write_trace_csv(a, sa);
    write_trace_csv(b, sb);
    EXPECT_EQ(sa.str(), sb.str());
    const auto c = run_agm(inst.f, inst.x0, iters(500), &inst.set);
    const auto e = run_agm(inst.f, inst.x0, iters(500), &inst.set);
    EXPECT_EQ(c, e);
  });
}

TEST(DiagnosticsProperty, EstimateSequenceInvariants) {
  afw_test::for_all(19, 25, [](afw_test::Gen& g, int) {
    const auto inst = random_quadratic_on_ball(g);
    TraceOptions opts;
    opts.diagnostics = true;
    const auto t = run_afw(inst.f, inst.set, inst.x0, Schedule::afw_shifted(), iters(2000), opts);
    const auto phi = t.column_values(columns::kPhiStar);
    const auto xi = t.column_values(columns::kXi);
    const auto lambda = t.column_values(columns::kLambda);
    const double L = inst.f.smoothness();
    const double D = inst.set.diameter();
    const double gap0 = t.rows[0].f_value - inst.f_star;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double f = t.rows[i].f_value;
      const double k = static_cast<double>(t.rows[i].k);
      ASSERT_LE(f, phi[i] + xi[i] + 1e-9 * std::max(1.0, std::abs(f))) << "k = " << k;
      ASSERT_LE(f - inst.f_star, lambda[i] * gap0 + xi[i] + 1e-9) << "k = " << k;
      ASSERT_LE(xi[i], 2 * L * D * D / (k + 2)) << "k = " << k;
    }
  });
}

TEST(DiagnosticsProperty, SandwichOnLogisticRuns) {
  afw_test::for_all(20, 10, [](afw_test::Gen& g, int c) {
    const Index d = g.integer(2, 10);
    const auto set = random_ball(g, d);
    const auto f =
        logistic_objective(random_logistic_problem(30, d, Seed{static_cast<std::uint64_t>(c)}));
    TraceOptions opts;
    opts.diagnostics = true;
    const auto t =
        run_afw(f, set, feasible_start(g, set, d), Schedule::afw_shifted(), iters(1000), opts);
    const auto phi = t.column_values(columns::kPhiStar);
    const auto xi = t.column_values(columns::kXi);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double fv = t.rows[i].f_value;
      ASSERT_LE(fv, phi[i] + xi[i] + 1e-9 * std::max(1.0, std::abs(fv)));
    }
  });
}

TEST(DiagnosticsProperty, AgmGradientDecay) {
  afw_test::for_all(21, 20, [](afw_test::Gen& g, int) {
    const Index d = g.integer(2, 12);
    const DenseVector w = (g.vector(d).array().abs() + 0.05).matrix();
    const DenseVector c = g.vector(d);
    const auto f = diagonal_quadratic_objective(w, c);
    const DenseVector x0 = g.vector(d, 3.0);
    TraceOptions opts;
    opts.x_star = c;
    const auto t = run_agm(f, x0, iters(3000), nullptr, opts);
    const double L = f.smoothness();
    const double budget = f.value(x0) + L * (x0 - c).squaredNorm();
    const auto grad_sq = t.column_values(columns::kGradSqY);
    for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
      const double k = static_cast<double>(t.rows[i].k);
      ASSERT_LE(grad_sq[i], 16 * L * budget / ((k + 2) * (k + 2))) << "k = " << k;
    }
  });
}

TEST(DiagnosticsProperty, DualGapWeightsSumToOne) {
  std::vector<std::int64_t> ks;
  for (std::int64_t k = 1; k <= 3000; ++k) ks.push_back(k);
  afw_test::Gen g(22);
  for (int i = 0; i < 200; ++i) ks.push_back(g.integer(3001, 100000));
  ks.push_back(100000);
  for (auto k : ks) {
    double s = 0.0;
    for (double w : dual_gap_weights(k)) s += w;
    ASSERT_NEAR(s, 1.0, 1e-12) << "k = " << k;
  }
}

TEST(DiagnosticsProperty, FwGapNonNegativeOnFeasiblePoints) {
  afw_test::for_all(23, 200, [](afw_test::Gen& g, int) {
    const Index d = g.integer(1, 12);
    const auto set = random_ball(g, d);
    const DenseVector x = feasible_start(g, set, d);
    EXPECT_GE(fw_gap(g.vector(d), x, set), -1e-12);
  });
}
