#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "gflow/fokker_planck.hpp"
#include "gflow/targets.hpp"
#include "support.hpp"

using namespace gflow;
using testing_support::NewtonResolvent;
using testing_support::sampled;

namespace {

struct Benchmark {
  Grid grid;
  GridDensity rho_d;
  GridDensity rho0;
  WeightedOperator op;
  RatioField v0;

  explicit Benchmark(std::size_t n = 401)
      : grid(Grid::uniform(-8, 8, n)),
        rho_d(sampled(TargetModel::gaussian(0, 1), grid)),
        rho0(sampled(TargetModel::gaussian(2.0, 0.7), grid)),
        op(rho_d),
        v0(ratio_of(rho0, rho_d)) {}
};

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Max error of the OU identities on |y| <= 5
std::pair<double, double> ou_errors(std::size_t n) {
  const Benchmark b(n);
  std::vector<double> y(b.grid.n);
  std::vector<double> y2(b.grid.n);
  for (std::size_t i = 0; i < b.grid.n; ++i) {
    y[i] = b.grid.node(i);
    y2[i] = y[i] * y[i];
  }
  const auto ly = b.op.apply(y);
  const auto ly2 = b.op.apply(y2);
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t i = 0; i < b.grid.n; ++i) {
    if (std::abs(y[i]) > 5.0) continue;
    e1 = std::max(e1, std::abs(ly[i] + y[i]));
    e2 = std::max(e2, std::abs(ly2[i] - (2.0 - 2.0 * y2[i])));
  }
  return {e1, e2};
}

} // namespace

TEST(WeightedLaplacian, ConstantsAreInTheKernel) {
  const Benchmark b;
  for (double c : {0.0, 1.0, -3.5, std::log(2.0)})
    for (double x : b.op.apply(std::vector<double>(b.grid.n, c))) EXPECT_EQ(x, 0.0);
}

TEST(WeightedLaplacian, OrnsteinUhlenbeckGeneratorIsSecondOrder) {
  const auto [a1, a2] = ou_errors(401);
  const auto [b1, b2] = ou_errors(801);
  EXPECT_LT(a1, 1e-2);
  EXPECT_LT(a2, 1e-1);
  EXPECT_GT(a1 / b1, 3.5);
  EXPECT_GT(a2 / b2, 3.5);
}

TEST(WeightedLaplacian, SelfAdjointAndMassPreserving) {
  const Benchmark b;
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto p = gflow::detail::random_smooth_field(b.grid, 2.0, rng);
    const auto q = gflow::detail::random_smooth_field(b.grid, 2.0, rng);
    const double pq = b.op.inner(b.op.apply(p), q);
    const double qp = b.op.inner(p, b.op.apply(q));
    const double scale = std::max(1.0, std::abs(pq));
    EXPECT_NEAR(pq, qp, 1e-12 * scale);
    EXPECT_NEAR(pq, -b.op.dirichlet(p, q), 1e-12 * scale);
    EXPECT_NEAR(b.op.weighted_mass(b.op.apply(p)), 0.0, 1e-12);
  }
}

TEST(WeightedLaplacian, RejectsNonpositiveTarget) {
  const auto g = Grid::uniform(-1, 1, 5);
  EXPECT_THROW(WeightedOperator(GridDensity(g, {0.0, 1.0, 1.0, 1.0, 0.0})), PositivityError);
}

TEST(Resolvent, ConstantsAreFixedPoints) {
  const Benchmark b;
  for (double c : {1.0, 0.25, 3.0}) {
    const ResolventProblem p(0.05, 3.0, RatioField(b.grid, std::vector<double>(b.grid.n, c)));
    const auto r = solve_resolvent(p, b.op);
    for (std::size_t i = 0; i < b.grid.n; ++i) EXPECT_NEAR(r.v[i], c, 1e-10);
    EXPECT_LE(r.bracket_gap, 1e-10);
  }
}

TEST(Resolvent, AgreesWithNewtonOracleOnTheBenchmark) {
  const Benchmark b;
  const double beta = b.v0.max();
  const auto r = solve_resolvent(ResolventProblem(0.01, beta, b.v0), b.op, 1e-12);
  const NewtonResolvent newton(b.rho_d);
  const auto ref = newton.solve(std::vector<double>(b.v0.values().begin(), b.v0.values().end()), 0.01);
  EXPECT_LT(newton.residual_norm([&] {
    std::vector<double> w(ref.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::log1p(ref[i]);
    return w;
  }(), std::vector<double>(b.v0.values().begin(), b.v0.values().end()), 0.01), 1e-12);
  EXPECT_LE(max_abs_diff(r.v.values(), ref), 1e-8);
}

TEST(Resolvent, AgreesWithNewtonOracleOnRandomData) {
  const Benchmark b;
  const NewtonResolvent newton(b.rho_d);
  Rng rng(31);
  for (int t = 0; t < 20; ++t) {
    const double beta = 1.0 + 5.0 * rng.uniform();
    const double lambda = std::pow(10.0, -3.0 + 3.0 * rng.uniform());
    const auto f = gflow::detail::random_smooth_field(b.grid, beta, rng);
    const auto r = solve_resolvent(ResolventProblem(lambda, beta, RatioField(b.grid, f)), b.op, 1e-12);
    EXPECT_LE(max_abs_diff(r.v.values(), newton.solve(f, lambda)), 1e-8) << "trial " << t;
    EXPECT_LE(r.max_inversion, 1e-12);
  }
}

TEST(Resolvent, IteratesStayOrdered) {
  const Benchmark b;
  const auto r = solve_resolvent(ResolventProblem(0.01, b.v0.max(), b.v0), b.op);
  EXPECT_LE(r.max_sub_decrease, 1e-12);
  EXPECT_LE(r.max_super_increase, 1e-12);
  EXPECT_LE(r.max_inversion, 1e-10);
  EXPECT_LE(r.bracket_gap, 1e-10);
}

TEST(Resolvent, UniformAndAdaptiveShiftsAgree) {
  const Benchmark b;
  const ResolventProblem p(0.01, b.v0.max(), b.v0);
  const auto a = solve_resolvent(p, b.op, 1e-11, 500, ShiftRule::adaptive);
  const auto u = solve_resolvent(p, b.op, 1e-11, 5000, ShiftRule::uniform);
  EXPECT_LE(max_abs_diff(a.v.values(), u.v.values()), 1e-9);
  EXPECT_LT(a.iterations, u.iterations);
}

TEST(Resolvent, IterationBudgetExhaustionReportsTheGap) {
  const Benchmark b;
  try {
    solve_resolvent(ResolventProblem(0.01, b.v0.max(), b.v0), b.op, 1e-10, 1);
    FAIL() << "expected non-convergence";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.iterations(), 1);
    EXPECT_GT(e.bracket_gap(), 1e-10);
  }
}

TEST(Resolvent, RejectsDataOutsideTheBracket) {
  const Benchmark b;
  EXPECT_THROW(ResolventProblem(0.01, 1.0, RatioField(b.grid, std::vector<double>(b.grid.n, 2.0))),
               std::invalid_argument);
  EXPECT_THROW(ResolventProblem(-0.01, 1.0, RatioField(b.grid, std::vector<double>(b.grid.n, 1.0))),
               std::invalid_argument);
}

TEST(Evolve, TargetIsInvariant) {
  const Benchmark b;
  const auto r = crandall_liggett_evolve(RatioField(b.grid, std::vector<double>(b.grid.n, 1.0)), b.op, 6.0, 600);
  for (std::size_t i = 0; i < b.grid.n; ++i) EXPECT_NEAR(r.v[i], 1.0, 1e-12);
  for (double j : r.trace.jsd_values) EXPECT_LE(j, 1e-10);
  const auto audit = jsd_descent_audit(r.trace);
  EXPECT_TRUE(audit.is_monotone);
  EXPECT_LE(audit.dissipation_check, 1e-12);
}

TEST(Evolve, GaussianShiftBenchmark) {
  const Benchmark b;
  const auto r = crandall_liggett_evolve(b.v0, b.op, 6.0, 600);
  const auto& j = r.trace.jsd_values;
  ASSERT_EQ(j.size(), 601u);
  const auto audit = jsd_descent_audit(r.trace);
  EXPECT_TRUE(audit.is_monotone);
  EXPECT_LE(audit.dissipation_check, 1e-6);
  for (std::size_t k = 1; k < j.size(); ++k) EXPECT_LT(j[k], j[k - 1]) << "step " << k;

  const double beta = r.trace.beta;
  EXPECT_LE(r.stats.max_mass_defect, 1e-9);
  EXPECT_GE(r.stats.min_inf_v, 0.0);
  EXPECT_LE(r.stats.max_sup_v, beta + 1e-12);
  EXPECT_LE(r.trace.energy_partial_sums.back(), 1.05 * (1.0 + beta) * beta * beta);
  EXPECT_LE(r.stats.max_bracket_gap, 1e-10);

  // The coarse run must track the fine reference (n = 1601, 2400 steps), whose final JSD is 0.079154.
  // That value is far above 0.01, so the threshold here comes from the reference run. The literal
  // 0.01 is kept, and fails, in the acceptance binary.
  EXPECT_NEAR(j.back(), 0.079154, 1e-3);
}

TEST(Evolve, StepDoublingConverges) {
  const Benchmark b;
  std::vector<RatioField> v;
  for (int n : {100, 200, 400, 800}) v.push_back(crandall_liggett_evolve(b.v0, b.op, 6.0, n).v);
  const auto dist = [&](const RatioField& a, const RatioField& c) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - c[i];
    return b.op.weighted_l1(d);
  };
  const double d1 = dist(v[0], v[1]);
  const double d2 = dist(v[1], v[2]);
  const double d3 = dist(v[2], v[3]);
  EXPECT_GE(d1 / d2, 1.5);
  EXPECT_GE(d2 / d3, 1.5);
}

TEST(Evolve, NegativeControlTraceIsFlagged) {
  const Benchmark b;
  auto r = crandall_liggett_evolve(b.v0, b.op, 1.0, 50);
  ASSERT_TRUE(jsd_descent_audit(r.trace).is_monotone);
  r.trace.jsd_values[20] = r.trace.jsd_values[19] + 1e-6;
  EXPECT_FALSE(jsd_descent_audit(r.trace).is_monotone);
}

TEST(Evolve, ForcedFailureNamesTheStep) {
  const Benchmark b;
  try {
    crandall_liggett_evolve(b.v0, b.op, 6.0, 600, 1e-10, 1);
    FAIL() << "expected non-convergence";
  } catch (const NonConvergenceError& e) {
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 1);
  }
}

TEST(Accretivity, HoldsOnRandomPairs) {
  const Benchmark b;
  for (double lambda : {0.001, 0.01, 0.1}) EXPECT_LE(accretivity_check(b.op, 5.0, lambda, 500, 17), 1e-10);
}

TEST(Accretivity, EqualityForConstants) {
  const Benchmark b;
  const std::vector<double> c1(b.grid.n, 0.5);
  const std::vector<double> c2(b.grid.n, 2.0);
  const auto a1 = b.op.apply_A(c1);
  const auto a2 = b.op.apply_A(c2);
  std::vector<double> diff(b.grid.n);
  std::vector<double> img(b.grid.n);
  for (std::size_t i = 0; i < b.grid.n; ++i) {
    diff[i] = c1[i] - c2[i];
    img[i] = diff[i] + 0.1 * (a1[i] - a2[i]);
  }
  EXPECT_EQ(b.op.weighted_l1(diff) - b.op.weighted_l1(img), 0.0);
}
