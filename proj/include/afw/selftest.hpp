#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "afw/data_io.hpp"
#include "afw/diagnostics.hpp"
#include "afw/solvers.hpp"
#include "afw/synthetic.hpp"

namespace afw {

/// Replaceable pieces for mutation testing of the self-test itself.
struct SelftestHooks {
  std::function<DenseVector(const DenseVector&, double)> lmo_l2 =
      [](const DenseVector& theta, double radius) { return afw::lmo_l2(theta, radius); };
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest_detail {

/// Tracks the largest violation of `lhs <= rhs + slack` seen so far.
struct Worst {
  double excess = -std::numeric_limits<double>::infinity();
  void check(double lhs, double rhs, double slack) { excess = std::max(excess, lhs - rhs - slack); }
  void fail() { excess = std::numeric_limits<double>::infinity(); }
  bool ok() const { return !(excess > 0.0); }
  std::string describe() const {
    return ok() ? "ok" : "worst excess " + format_double(excess);
  }
};

/// Point on the sphere of `set` (norm R) or inside it, alternating.
inline DenseVector sample_feasible(const FeasibleSet& set, Rng& rng, bool boundary) {
  DenseVector x = random_feasible_point(set, rng);
  if (boundary) x *= set.radius() / set.norm(x);
  return x;
}

inline PropertyResult lmo_l2_optimality(const SelftestHooks& hooks) {
  Rng rng = make_rng(Seed{11});
  const double radius = 2.0;
  const auto set = FeasibleSet::l2_ball(radius, 5);
  Worst worst;
  for (int t = 0; t < 100; ++t) {
    const DenseVector theta = random_gaussian(5, rng);
    const DenseVector v = hooks.lmo_l2(theta, radius);
    worst.check(std::abs(v.norm() - radius), 0.0, 1e-12);
    for (int s = 0; s < 1000; ++s) {
      const DenseVector x = sample_feasible(set, rng, s % 2 == 0);
      worst.check(theta.dot(v), theta.dot(x), 1e-10);
    }
  }
  return {"lmo_l2 optimality", worst.ok(), worst.describe()};
}

inline PropertyResult lmo_l1_enumeration() {
  Rng rng = make_rng(Seed{12});
  bool ok = true;
  for (int t = 0; t < 1000 && ok; ++t) {
    const Index d = 1 + t % 12;
    DenseVector theta = random_gaussian(d, rng);
    if (t % 7 == 0) theta[d - 1] = theta[0];  // ties
    const double radius = 1.5;
    const DenseVector v = lmo_l1(theta, radius);
    DenseVector best;
    double best_val = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d; ++i) {
      for (double s : {1.0, -1.0}) {
        DenseVector e = DenseVector::Zero(d);
        e[i] = s * radius;
        const double val = theta.dot(e);
        if (val < best_val) {
          best_val = val;
          best = e;
        }
      }
    }
    ok = v == best;
  }
  return {"lmo_l1 matches vertex enumeration", ok, ok ? "ok" : "mismatch"};
}

inline PropertyResult lmo_lp_optimality() {
  Rng rng = make_rng(Seed{13});
  Worst worst;
  for (double p : {1.5, 3.0, 4.0}) {
    const auto set = FeasibleSet::lp_ball(1.0, p, 4);
    for (int t = 0; t < 30; ++t) {
      const DenseVector theta = random_gaussian(4, rng);
      const DenseVector v = lmo_lp(theta, 1.0, p);
      worst.check(std::abs(lp_norm(v, p) - 1.0), 0.0, 1e-9);
      for (int s = 0; s < 1000; ++s) {
        const DenseVector x = sample_feasible(set, rng, s % 2 == 0);
        worst.check(theta.dot(v), theta.dot(x), 1e-9);
      }
    }
  }
  return {"lmo_lp optimality", worst.ok(), worst.describe()};
}

inline PropertyResult lmo_lp_p2_consistency(const SelftestHooks& hooks) {
  Rng rng = make_rng(Seed{14});
  Worst worst;
  for (int t = 0; t < 100; ++t) {
    const DenseVector theta = random_gaussian(6, rng);
    worst.check((lmo_lp(theta, 1.3, 2.0) - hooks.lmo_l2(theta, 1.3)).cwiseAbs().maxCoeff(), 0.0,
                1e-12);
  }
  return {"lmo_lp(p=2) equals lmo_l2", worst.ok(), worst.describe()};
}

inline PropertyResult lmo_nuclear_optimality() {
  Rng rng = make_rng(Seed{15});
  Worst worst;
  const double radius = 1.5;
  for (int t = 0; t < 20; ++t) {
    DenseMatrix g(6, 5);
    for (Index j = 0; j < 5; ++j) g.col(j) = random_gaussian(6, rng);
    const RankOne v = lmo_nuclear(SparseMatrix::from_dense(g), radius, 1e-12, Seed{static_cast<std::uint64_t>(t)});
    const DenseMatrix vd = v.to_dense();
    const double gv = (g.array() * vd.array()).sum();
    worst.check(std::abs(nuclear_norm(vd) - radius), 0.0, 1e-8);
    for (int s = 0; s < 500; ++s) {
      DenseMatrix w = radius * random_unit_vector(6, rng) * random_unit_vector(5, rng).transpose();
      if (s % 2 == 1) {
        const DenseMatrix w2 =
            radius * random_unit_vector(6, rng) * random_unit_vector(5, rng).transpose();
        w = 0.5 * w + 0.5 * w2;
      }
      worst.check(gv, (g.array() * w.array()).sum(), 1e-6);
    }
  }
  return {"lmo_nuclear optimality", worst.ok(), worst.describe()};
}

inline PropertyResult project_l1_kkt() {
  Rng rng = make_rng(Seed{16});
  Worst worst;
  for (int t = 0; t < 100; ++t) {
    const DenseVector z = 2.0 * random_gaussian(7, rng);
    const double radius = 1.0;
    const DenseVector x = project_l1(z, radius);
    worst.check(x.lpNorm<1>(), radius, 1e-12);
    if (z.lpNorm<1>() <= radius) {
      worst.check((x - z).cwiseAbs().maxCoeff(), 0.0, 0.0);
      continue;
    }
    // x = soft(z, tau) with a single tau >= 0: nonzero entries keep sign and
    // shrink by tau; zeroed entries have |z_i| <= tau.
    double tau = -1.0;
    for (Index i = 0; i < z.size(); ++i) {
      if (x[i] != 0.0) tau = std::abs(z[i]) - std::abs(x[i]);
    }
    worst.check(-tau, 0.0, 0.0);
    for (Index i = 0; i < z.size(); ++i) {
      if (x[i] != 0.0) {
        worst.check(std::abs(std::abs(z[i]) - std::abs(x[i]) - tau), 0.0, 1e-12);
        worst.check(-(x[i] * z[i]), 0.0, 0.0);
      } else {
        worst.check(std::abs(z[i]), tau, 1e-12);
      }
    }
    worst.check(std::abs(x.lpNorm<1>() - radius), 0.0, 1e-12);
  }
  return {"project_l1 KKT conditions", worst.ok(), worst.describe()};
}

struct NamedObjective {
  std::string name;
  Objective objective;
  double spread;  // scale of sampled points
};

inline std::vector<NamedObjective> sample_objectives() {
  std::vector<NamedObjective> out;
  Rng rng = make_rng(Seed{17});
  out.push_back({"quadratic", quadratic_objective(random_gaussian(5, rng), 1.5), 2.0});
  DenseVector w = random_gaussian(6, rng).cwiseAbs().array() + 0.1;
  out.push_back({"diagonal quadratic", diagonal_quadratic_objective(w, random_gaussian(6, rng)), 2.0});
  out.push_back({"logistic", logistic_objective(random_logistic_problem(10, 5, Seed{18}), Seed{19}), 1.0});
  const auto mc = random_low_rank_completion(8, 6, 2, 0.5, Seed{20});
  out.push_back({"matrix completion", matcomp_objective(mc.problem), 1.0});
  return out;
}

inline PropertyResult gradient_check() {
  Rng rng = make_rng(Seed{21});
  Worst worst;
  std::string failing;
  for (const auto& o : sample_objectives()) {
    for (int t = 0; t < 100; ++t) {
      const DenseVector x = o.spread * random_gaussian(o.objective.dim(), rng);
      const DenseVector d = random_unit_vector(o.objective.dim(), rng);
      const double h = 1e-5;
      const double fd = (o.objective.value(x + h * d) - o.objective.value(x - h * d)) / (2.0 * h);
      const double dd = o.objective.gradient(x).dot(d);
      const double before = worst.excess;
      worst.check(std::abs(fd - dd), 0.0, 1e-5 * std::max(1.0, std::abs(dd)));
      if (worst.excess > before && !worst.ok() && failing.empty()) failing = o.name;
    }
  }
  return {"gradient finite differences", worst.ok(),
          worst.ok() ? "ok" : failing + ": " + worst.describe()};
}

inline PropertyResult co_coercivity() {
  Rng rng = make_rng(Seed{22});
  Worst worst;
  for (const auto& o : sample_objectives()) {
    const double L = o.objective.smoothness();
    for (int t = 0; t < 100; ++t) {
      const DenseVector x = o.spread * random_gaussian(o.objective.dim(), rng);
      const DenseVector y = o.spread * random_gaussian(o.objective.dim(), rng);
      const DenseVector gx = o.objective.gradient(x);
      const DenseVector gy = o.objective.gradient(y);
      const double lhs = (gx - gy).squaredNorm() / (2.0 * L);
      const double rhs = o.objective.value(y) - o.objective.value(x) - gx.dot(y - x);
      worst.check(lhs, rhs, 1e-9);
    }
  }
  return {"co-coercivity", worst.ok(), worst.describe()};
}

inline Objective unit_parabola() { return quadratic_objective(DenseVector::Zero(1), 1.0); }

inline DenseVector scalar(double x) { return DenseVector::Constant(1, x); }

inline PropertyResult hand_trace_fw() {
  const auto set = FeasibleSet::l1_ball(1.0, 1);
  StoppingRule stop;
  stop.max_iters = 3;
  const auto t = run_fw(unit_parabola(), set, scalar(1.0), Schedule::fw_classic(), stop);
  const double expected[] = {1.0, 1.0, 1.0 / 9.0};
  bool ok = t.rows.size() == 4;
  for (int k = 0; ok && k < 3; ++k) ok = std::abs(t.rows[k].f_value - expected[k]) <= 1e-15;
  return {"FW hand trace", ok, ok ? "ok" : "f sequence differs from (1, 1, 1/9)"};
}

inline PropertyResult hand_trace_afw() {
  const auto set = FeasibleSet::l1_ball(1.0, 1);
  StoppingRule stop;
  stop.max_iters = 1;
  bool ok = true;
  auto observe = [&](const StepEvent<DenseVector, DenseVector>& e) {
    if (e.k != 0) return;
    ok = ok && std::abs(e.y[0] - 1.0) <= 1e-15 && std::abs(e.theta[0] - 4.0 / 3.0) <= 1e-15 &&
         std::abs(e.v_next[0] + 1.0) <= 1e-15 && std::abs(e.x_next[0] + 1.0 / 3.0) <= 1e-15;
  };
  const auto t = run_afw(VectorSpace(unit_parabola(), set), scalar(1.0), Schedule::afw_shifted(),
                         stop, {}, observe);
  ok = ok && t.rows.size() == 2 && std::abs(t.rows[1].f_value - 1.0 / 9.0) <= 1e-15;
  return {"AFW hand trace", ok, ok ? "ok" : "step 0 differs from y=1, theta=4/3, v=-1, x=-1/3"};
}

inline PropertyResult hand_trace_agm() {
  StoppingRule stop;
  stop.max_iters = 1;
  TraceOptions opts;
  opts.x_star = scalar(0.0);
  const auto t = run_agm(unit_parabola(), scalar(1.0), stop, nullptr, opts);
  const auto mu = t.column_values(columns::kMu);
  const auto vd = t.column_values(columns::kVDistSq);
  const bool ok = t.rows.size() == 2 && t.rows[1].f_value == 0.0 &&
                  std::abs(mu[1] - 4.0 / 3.0) <= 1e-15 && vd[1] <= 1e-30 &&
                  std::abs(t.rows[0].step_delta - 2.0 / 3.0) <= 1e-15;
  return {"AGM hand trace", ok, ok ? "ok" : "step 0 differs from x=0, v=0, mu=4/3"};
}

/// 20-d quadratic ||x - c||^2 with ||c|| = 2 on the unit l2 ball.
struct ActiveBallInstance {
  Objective objective;
  FeasibleSet set;
  DenseVector x0;
  double f_star;
};

inline ActiveBallInstance active_ball_instance() {
  const DenseVector c = random_center(20, 2.0, Seed{100});
  auto set = FeasibleSet::l2_ball(1.0, 20);
  Rng rng = make_rng(Seed{0});
  DenseVector x0 = random_feasible_point(set, rng);
  return {quadratic_objective(c, 1.0), set, x0, 1.0};
}

inline PropertyResult es_sandwich() {
  const auto inst = active_ball_instance();
  StoppingRule stop;
  stop.max_iters = 1000;
  TraceOptions opts;
  opts.diagnostics = true;
  const auto t = run_afw(inst.objective, inst.set, inst.x0, Schedule::afw_shifted(), stop, opts);
  const auto phi = t.column_values(columns::kPhiStar);
  const auto xi = t.column_values(columns::kXi);
  const auto lambda = t.column_values(columns::kLambda);
  const double L = inst.objective.smoothness();
  const double D = inst.set.diameter();
  const double gap0 = t.rows[0].f_value - inst.f_star;
  Worst worst;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const double f = t.rows[i].f_value;
    const double k = static_cast<double>(t.rows[i].k);
    worst.check(f, phi[i] + xi[i], 1e-9 * std::max(1.0, std::abs(f)));
    worst.check(f - inst.f_star, lambda[i] * gap0 + xi[i], 1e-9);
    worst.check(xi[i], 2.0 * L * D * D / (k + 2.0), 1e-12);
  }
  return {"estimate-sequence sandwich", worst.ok(), worst.describe()};
}

inline PropertyResult theta_and_lambda_identities() {
  const auto inst = active_ball_instance();
  StoppingRule stop;
  stop.max_iters = 101;
  TraceOptions opts;
  opts.diagnostics = true;
  std::vector<DenseVector> grads;
  DenseVector theta_101;
  auto observe = [&](const StepEvent<DenseVector, DenseVector>& e) {
    grads.push_back(e.grad_y);
    if (e.k == 100) theta_101 = e.theta;
  };
  const auto t = run_afw(VectorSpace(inst.objective, inst.set), inst.x0, Schedule::afw_shifted(),
                         stop, opts, observe);
  Worst worst;
  // theta_{k+1} = sum_tau 2(tau+2)/((k+2)(k+3)) grad f(y_tau) at k = 100
  const double k = 100.0;
  DenseVector unrolled = DenseVector::Zero(20);
  for (int tau = 0; tau <= 100; ++tau) {
    unrolled += 2.0 * (tau + 2.0) / ((k + 2.0) * (k + 3.0)) * grads[static_cast<std::size_t>(tau)];
  }
  if (theta_101.size() != 20) {
    worst.fail();
  } else {
    worst.check((theta_101 - unrolled).norm(), 0.0, 1e-10);
  }
  const auto lambda = t.column_values(columns::kLambda);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double kk = static_cast<double>(t.rows[i].k);
    worst.check(std::abs(lambda[i] - 2.0 / ((kk + 1.0) * (kk + 2.0))), 0.0, 1e-14);
  }
  return {"theta average and lambda closed form", worst.ok(), worst.describe()};
}

inline PropertyResult dual_gap_weight_sum() {
  Worst worst;
  for (std::int64_t k = 1; k <= 2000; ++k) {
    double s = 0.0;
    for (double w : dual_gap_weights(k)) s += w;
    worst.check(std::abs(s - 1.0), 0.0, 1e-12);
  }
  return {"dual gap weights sum to one", worst.ok(), worst.describe()};
}

inline PropertyResult momentum_equivalence() {
  Rng rng = make_rng(Seed{23});
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  Worst worst;
  for (int t = 0; t < 1000; ++t) {
    const DenseVector v = random_gaussian(10, rng);
    const DenseVector g = random_gaussian(10, rng);
    const double delta = unit(rng);
    const double mu = 4.0 * unit(rng);
    worst.check(agm_momentum_equivalence(v, g, delta, mu).residual, 0.0, 1e-12);
  }
  return {"AGM momentum as lower-bound minimizer", worst.ok(), worst.describe()};
}

inline PropertyResult determinism() {
  const auto inst = active_ball_instance();
  StoppingRule stop;
  stop.max_iters = 300;
  TraceOptions opts;
  opts.diagnostics = true;
  const auto a = run_afw(inst.objective, inst.set, inst.x0, Schedule::afw_shifted(), stop, opts);
  const auto b = run_afw(inst.objective, inst.set, inst.x0, Schedule::afw_shifted(), stop, opts);
  std::ostringstream sa;
  std::ostringstream sb;
  write_trace_csv(a, sa);
  write_trace_csv(b, sb);
  const bool ok = a == b && sa.str() == sb.str();
  return {"deterministic traces", ok, ok ? "ok" : "two identical runs differ"};
}

}  // namespace selftest_detail

inline std::vector<PropertyResult> run_selftest(const SelftestHooks& hooks = {}) {
  namespace s = selftest_detail;
  std::vector<std::function<PropertyResult()>> properties = {
      [&] { return s::lmo_l2_optimality(hooks); },
      [] { return s::lmo_l1_enumeration(); },
      [] { return s::lmo_lp_optimality(); },
      [&] { return s::lmo_lp_p2_consistency(hooks); },
      [] { return s::lmo_nuclear_optimality(); },
      [] { return s::project_l1_kkt(); },
      [] { return s::gradient_check(); },
      [] { return s::co_coercivity(); },
      [] { return s::hand_trace_fw(); },
      [] { return s::hand_trace_afw(); },
      [] { return s::hand_trace_agm(); },
      [] { return s::es_sandwich(); },
      [] { return s::theta_and_lambda_identities(); },
      [] { return s::dual_gap_weight_sum(); },
      [] { return s::momentum_equivalence(); },
      [] { return s::determinism(); },
  };
  std::vector<PropertyResult> results;
  for (const auto& p : properties) {
    try {
      results.push_back(p());
    } catch (const std::exception& e) {
      results.push_back({"<property " + std::to_string(results.size() + 1) + ">", false,
                         std::string("threw: ") + e.what()});
    }
  }
  return results;
}

/// Prints one PASS/FAIL line per property. Exit code 0 iff all pass.
inline int cmd_selftest(std::ostream& out, const SelftestHooks& hooks = {}) {
  const auto results = run_selftest(hooks);
  std::size_t passed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name;
    if (!r.passed) out << " (" << r.detail << ')';
    out << '\n';
    if (r.passed) ++passed;
  }
  out << passed << '/' << results.size() << " properties passed\n";
  return passed == results.size() ? 0 : 1;
}

}  // namespace afw
