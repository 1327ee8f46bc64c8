#include <gtest/gtest.h>

#include "afw/diagnostics.hpp"
#include "afw/solvers.hpp"
#include "afw/synthetic.hpp"
#include "test_support.hpp"

using namespace afw;

namespace {

DenseVector scalar(double x) { return DenseVector::Constant(1, x); }

StoppingRule iters(std::int64_t k) {
  StoppingRule s;
  s.max_iters = k;
  return s;
}

SolverTrace synthetic_trace(std::int64_t k_max, const std::function<double(double)>& gap) {
  SolverTrace t;
  for (std::int64_t k = 0; k <= k_max; ++k) {
    t.rows.push_back({k, 1.0 + gap(static_cast<double>(k)), 0.0, 0.5, 0, {}});
  }
  return t;
}

using VecEvent = StepEvent<DenseVector, DenseVector>;

}  // namespace

TEST(FwGap, ZeroGradientGivesZero) {
  EXPECT_EQ(fw_gap(DenseVector::Zero(3), DenseVector::Zero(3), FeasibleSet::l2_ball(1.0, 3)), 0.0);
}

TEST(FwGap, IntervalAgainstEnumeratedVertices) {
  const DenseVector g = scalar(2.0);  // gradient of x^2 at 1
  double oracle = -std::numeric_limits<double>::infinity();
  for (double v : {-1.0, 1.0}) oracle = std::max(oracle, g[0] * (1.0 - v));
  EXPECT_EQ(fw_gap(g, scalar(1.0), FeasibleSet::l1_ball(1.0, 1)), 4.0);
  EXPECT_EQ(oracle, 4.0);
}

TEST(FwGap, UpperBoundsSuboptimality) {
  afw_test::Gen gen(1);
  const DenseVector c = gen.vector(6, 2.0);
  const auto set = FeasibleSet::l2_ball(1.0, 6);
  const auto f = quadratic_objective(c, 1.0);
  const double f_star = f.value(project_l2(c, 1.0));
  afw_test::for_all(2, 100, [&](afw_test::Gen& g, int) {
    const DenseVector x = g.in_lp_ball(6, 2.0, 1.0, false);
    const double gap = fw_gap(f.gradient(x), x, set);
    EXPECT_GE(gap, 0.0);
    EXPECT_GE(gap, f.value(x) - f_star - 1e-12);
  });
}

TEST(FwGap, DimensionChecked) {
  EXPECT_THROW(fw_gap(DenseVector::Zero(2), DenseVector::Zero(3), FeasibleSet::l2_ball(1.0, 3)),
               DimensionMismatch);
}

TEST(SurrogateStep, FirstStepDropsThetaTerm) {
  afw_test::Gen gen(3);
  const DenseVector x0 = gen.vector(4);
  const DenseVector y0 = gen.vector(4);
  const DenseVector g0 = gen.vector(4);
  const DenseVector v1 = gen.vector(4);
  const double f0 = 2.5;
  const double fy = 1.25;
  const double d = 2.0 / 3.0;
  const auto s0 = initial_surrogate(x0, f0);
  EXPECT_EQ(s0.lambda, 1.0);
  EXPECT_EQ(s0.xi, 0.0);
  EXPECT_EQ(s0.phi_star, f0);
  const auto s1 = surrogate_step(s0, d, fy, g0, y0, v1, 3.0);
  EXPECT_NEAR(s1.phi_star, (1 - d) * f0 + d * fy + d * g0.dot(v1 - y0), 1e-14);
  EXPECT_NEAR(s1.xi, 0.5 * 3.0 * d * d * (v1 - x0).squaredNorm(), 1e-14);
  EXPECT_NEAR(s1.lambda, 1 - d, 1e-16);
  EXPECT_LE((s1.theta - d * g0).norm(), 1e-15);
  EXPECT_EQ(s1.k, 1);
}

TEST(SurrogateStep, StationaryMomentumHasNoPenalty) {
  afw_test::Gen gen(4);
  SurrogateState s{gen.vector(3), gen.vector(3), 0.7, 0.3, 0.02, 5};
  const auto next = surrogate_step(s, 0.25, 0.5, gen.vector(3), gen.vector(3), s.v, 10.0);
  EXPECT_DOUBLE_EQ(next.xi, 0.75 * 0.02);
}

TEST(SurrogateStep, OneDimensionalRunRecomputed) {
  const auto f = quadratic_objective(scalar(0.3), 1.0);
  const auto set = FeasibleSet::l2_ball(1.0, 1);
  TraceOptions opts;
  opts.diagnostics = true;
  // independent recomputation of (phi*, xi, lambda) alongside the run
  double phi = f.value(scalar(-0.8));
  double xi = 0.0;
  double lambda = 1.0;
  double theta = 0.0;
  double v = -0.8;
  std::vector<double> phis{phi}, xis{xi}, lambdas{lambda};
  auto observe = [&](const VecEvent& e) {
    const double d = e.delta;
    const double y = e.y[0];
    const double g = e.grad_y[0];
    const double vn = e.v_next[0];
    phi = (1 - d) * phi + d * f.value(e.y) + (1 - d) * theta * (vn - v) + d * g * (vn - y);
    xi = (1 - d) * xi + 0.5 * f.smoothness() * d * d * (vn - v) * (vn - v);
    lambda *= (1 - d);
    theta = (1 - d) * theta + d * g;
    v = vn;
    phis.push_back(phi);
    xis.push_back(xi);
    lambdas.push_back(lambda);
  };
  const auto t = run_afw(VectorSpace(f, set), scalar(-0.8), Schedule::afw_shifted(), iters(50), opts,
                         observe);
  const auto tp = t.column_values(columns::kPhiStar);
  const auto tx = t.column_values(columns::kXi);
  const auto tl = t.column_values(columns::kLambda);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    EXPECT_NEAR(tp[i], phis[i], 1e-12);
    EXPECT_NEAR(tx[i], xis[i], 1e-12);
    EXPECT_NEAR(tl[i], lambdas[i], 1e-15);
    EXPECT_LE(t.rows[i].f_value, tp[i] + tx[i] + 1e-10);
  }
}

// Phi*_k equals the unrolled weighted sum of supporting hyperplanes,
// lambda_k f(x0) + sum_tau w_tau [f(y_tau) + <grad f(y_tau), x - y_tau>],
// evaluated at its minimizer v_k.
TEST(SurrogateStep, RecursionMatchesUnrolledHyperplanes) {
  afw_test::Gen gen(5);
  const auto f = logistic_objective(random_logistic_problem(15, 4, Seed{9}));
  const auto set = FeasibleSet::l1_ball(2.0, 4);
  const DenseVector x0 = gen.in_lp_ball(4, 1.0, 2.0, false);
  struct Step {
    double delta, fy;
    DenseVector y, g, v_next;
  };
  std::vector<Step> steps;
  auto observe = [&](const VecEvent& e) {
    steps.push_back({e.delta, f.value(e.y), e.y, e.grad_y, e.v_next});
  };
  TraceOptions opts;
  opts.diagnostics = true;
  const auto t = run_afw(VectorSpace(f, set), x0, Schedule::afw_shifted(), iters(50), opts, observe);
  const auto phi = t.column_values(columns::kPhiStar);
  for (int k : {5, 20, 50}) {
    const DenseVector& vk = steps[static_cast<std::size_t>(k - 1)].v_next;
    double lambda = 1.0;
    for (int j = 0; j < k; ++j) lambda *= 1 - steps[static_cast<std::size_t>(j)].delta;
    double total = lambda * f.value(x0);
    for (int tau = 0; tau < k; ++tau) {
      double w = steps[static_cast<std::size_t>(tau)].delta;
      for (int j = tau + 1; j < k; ++j) w *= 1 - steps[static_cast<std::size_t>(j)].delta;
      const auto& s = steps[static_cast<std::size_t>(tau)];
      total += w * (s.fy + s.g.dot(vk - s.y));
    }
    EXPECT_NEAR(phi[static_cast<std::size_t>(k)], total, 1e-8) << "k = " << k;
  }
}

TEST(DualGapWeights, SmallK) {
  const auto w2 = dual_gap_weights(2);
  ASSERT_EQ(w2.size(), 2u);
  EXPECT_NEAR(w2[0], 0.4, 1e-16);
  EXPECT_NEAR(w2[1], 0.6, 1e-16);
  EXPECT_EQ(dual_gap_weights(1), std::vector<double>{1.0});
  EXPECT_THROW(dual_gap_weights(0), InvalidArgument);
}

TEST(DualGapWeights, SumToOne) {
  for (std::int64_t k : {1, 2, 3, 10, 999, 100000}) {
    double s = 0;
    for (double w : dual_gap_weights(k)) s += w;
    EXPECT_NEAR(s, 1.0, 1e-12) << k;
  }
}

TEST(WeightedDualGap, AgmBoundOn5dQuadratic) {
  afw_test::Gen gen(6);
  const DenseVector c = gen.vector(5);
  const auto f = quadratic_objective(c, 2.0);
  const DenseVector x0 = gen.vector(5, 2.0);
  std::vector<DualGapSample> samples;
  auto observe = [&](const AgmEvent& e) {
    samples.push_back({f.value(e.y), e.grad_y, e.v_next, e.y});
  };
  const auto t = run_agm(f, x0, iters(100), nullptr, {}, observe);
  const double bound = 2 * f.smoothness() * (x0 - c).squaredNorm() / (100.0 * 103.0);
  const double from_samples = weighted_dual_gap(std::span<const DualGapSample>(samples), 100);
  EXPECT_LE(from_samples - 0.0, bound);
  EXPECT_NEAR(weighted_dual_gap(t, 100), from_samples, 1e-12);
}

TEST(WeightedDualGap, IncompleteTraceRaises) {
  std::vector<double> models{1.0, 2.0};
  EXPECT_THROW(weighted_dual_gap(std::span<const double>(models), 3), IncompleteTrace);
  EXPECT_THROW(weighted_dual_gap(std::span<const double>(models), 0), IncompleteTrace);
  models[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(weighted_dual_gap(std::span<const double>(models), 2), IncompleteTrace);
  EXPECT_NEAR(weighted_dual_gap(std::span<const double>(models), 1), 1.0, 1e-16);
  const auto t = run_agm(quadratic_objective(scalar(0), 1.0), scalar(1.0), iters(3));
  EXPECT_THROW(weighted_dual_gap(t, 4), IncompleteTrace);
}

TEST(MomentumEquivalence, ZeroGradient) {
  const DenseVector v = DenseVector::LinSpaced(3, 0, 1);
  const auto m = agm_momentum_equivalence(v, DenseVector::Zero(3), 0.5, 1.0);
  EXPECT_EQ(m.closed, v);
  EXPECT_EQ(m.residual, 0.0);
}

TEST(MomentumEquivalence, MatchesAgmHandTrace) {
  const auto m = agm_momentum_equivalence(scalar(1.0), scalar(2.0), 2.0 / 3.0, 4.0 / 3.0);
  EXPECT_NEAR(m.closed[0], 0.0, 1e-15);
  EXPECT_LT(m.residual, 1e-12);
}

TEST(MomentumEquivalence, RandomInputs) {
  afw_test::for_all(7, 1000, [](afw_test::Gen& g, int) {
    const auto m = agm_momentum_equivalence(g.vector(10), g.vector(10), g.uniform(0.01, 1.0),
                                            g.uniform(0.01, 10.0));
    EXPECT_LT(m.residual, 1e-12);
  });
  EXPECT_THROW(agm_momentum_equivalence(scalar(1), scalar(1), 0.0, 1.0), InvalidArgument);
  EXPECT_THROW(agm_momentum_equivalence(scalar(1), DenseVector::Zero(2), 0.5, 1.0),
               DimensionMismatch);
}

TEST(EstimateRate, ExactPowerLaws) {
  const RateWindow w{100, 10000};
  EXPECT_NEAR(estimate_rate(synthetic_trace(10000, [](double k) { return 1.0 / k; }), 1.0, w).slope,
              -1.0, 0.01);
  EXPECT_NEAR(
      estimate_rate(synthetic_trace(10000, [](double k) { return 5.0 / (k * k); }), 1.0, w).slope,
      -2.0, 0.01);
  const auto flat = estimate_rate(synthetic_trace(10000, [](double) { return 0.3; }), 1.0, w);
  EXPECT_NEAR(flat.slope, 0.0, 0.01);
  const auto r = estimate_rate(synthetic_trace(10000, [](double k) { return 1.0 / k; }), 1.0, w);
  EXPECT_NEAR(r.r_squared, 1.0, 1e-9);
  EXPECT_EQ(r.used, 9901u);
}

TEST(EstimateRate, ExcludesZeroGapsAndRefusesNegative) {
  auto t = synthetic_trace(200, [](double k) { return 1.0 / k; });
  t.rows[150].f_value = 1.0;
  const auto r = estimate_rate(t, 1.0, {100, 200});
  EXPECT_EQ(r.excluded, std::vector<std::int64_t>{150});
  EXPECT_EQ(r.used, 100u);
  t.rows[150].f_value = 1.0 - 1e-6;
  EXPECT_THROW(estimate_rate(t, 1.0, {100, 200}), NegativeGap);
}

TEST(EstimateRate, EmptyWindowAndBadWindow) {
  const auto t = synthetic_trace(50, [](double k) { return 1.0 / k; });
  EXPECT_THROW(estimate_rate(t, 1.0, {45, 60}), EmptyWindow);
  EXPECT_THROW(estimate_rate(t, 1.0, {10, 10}), InvalidArgument);
  EXPECT_THROW(estimate_rate(t, 1.0, {0, 10}), InvalidArgument);
}

TEST(EstimateRate, DefaultWindowAndJson) {
  EXPECT_EQ(default_rate_window(10000).k_min, 100);
  EXPECT_EQ(default_rate_window(100000).k_min, 1000);
  EXPECT_EQ(default_rate_window(100000).k_max, 100000);
  const auto r = estimate_rate(synthetic_trace(1000, [](double k) { return 1.0 / k; }), 1.0,
                               default_rate_window(1000));
  const auto j = to_json(r);
  for (const char* key : {"slope", "intercept", "window", "r_squared"}) EXPECT_TRUE(j.contains(key));
  EXPECT_EQ(j["window"][0], 100);
}

TEST(Zigzag, DispersionOfDifferences) {
  const auto smooth = synthetic_trace(400, [](double k) { return 1.0 / k; });
  auto jagged = smooth;
  for (auto& r : jagged.rows) r.f_value += (r.k % 2 ? 1e-3 : 0.0);
  EXPECT_LT(zigzag_dispersion(smooth, {100, 400}), 1e-4);
  EXPECT_GT(zigzag_dispersion(jagged, {100, 400}), 9e-4);
}
