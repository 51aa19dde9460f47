#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "gflow/density.hpp"
#include "gflow/fokker_planck.hpp"
#include "gflow/targets.hpp"
#include "support.hpp"

using namespace gflow;
using testing_support::random_density;
using testing_support::sampled;

namespace {

const double ln2 = std::numbers::ln2;

Grid wide() { return Grid::uniform(-10.0, 10.0, 2001); }

// C^2 taper: 1 on |y| <= a, 0 at |y| = b
double taper(double y, double a, double b) {
  const double r = std::abs(y);
  if (r <= a) return 1.0;
  if (r >= b) return 0.0;
  const double s = (r - a) / (b - a);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

GridDensity box(const Grid& g, double lo, double hi) {
  std::vector<double> v(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.node(i) >= lo && g.node(i) <= hi) v[i] = 1.0;
  return GridDensity(g, v).normalized();
}

double sigmoid(double y) { return 1.0 / (1.0 + std::exp(-y)); }

} // namespace

TEST(Divergences, IdenticalArgumentsGiveZero) {
  const auto g = wide();
  const auto p = sampled(TargetModel::mixture({{0.4, -1.0, 0.8}, {0.6, 2.0, 1.3}}), g);
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_EQ(jsd(p, p), 0.0);
  EXPECT_EQ(tv_distance(p, p), 0.0);
  EXPECT_EQ(l1_distance(p, p), 0.0);
}

TEST(Divergences, GaussianShiftKlIsHalfTheSquaredShift) {
  const auto g = wide();
  const double kl = kl_divergence(sampled(TargetModel::gaussian(0, 1), g), sampled(TargetModel::gaussian(1, 1), g));
  EXPECT_NEAR(kl, 0.5, 1e-4);
}

TEST(Divergences, DisjointSupportsSaturate) {
  const auto g = wide();
  const auto p = box(g, -8.0, -2.0);
  const auto q = box(g, 2.0, 8.0);
  EXPECT_NEAR(jsd(p, q), ln2, 1e-8);
  EXPECT_NEAR(tv_distance(p, q), 1.0, 1e-8);
  EXPECT_TRUE(std::isinf(kl_divergence(p, q)));
}

TEST(Divergences, MismatchedGridsAreRejected) {
  const auto p = sampled(TargetModel::gaussian(0, 1), Grid::uniform(-8, 8, 401));
  const auto q = sampled(TargetModel::gaussian(0, 1), Grid::uniform(-8, 8, 403));
  EXPECT_THROW(kl_divergence(p, q), GridMismatchError);
  EXPECT_THROW(jsd(p, q), GridMismatchError);
  EXPECT_THROW(l1_distance(p, q), GridMismatchError);
}

TEST(Divergences, RandomPairsSatisfyMetricRelations) {
  const auto g = Grid::uniform(-8, 8, 401);
  Rng rng(2024);
  for (int t = 0; t < 100; ++t) {
    const auto p = random_density(g, rng);
    const auto q = random_density(g, rng);
    const double l1 = l1_distance(p, q);
    const double j = jsd(p, q);
    EXPECT_NEAR(l1, 2.0 * tv_distance(p, q), 1e-12);
    EXPECT_LE(2.0 * j, ln2 * l1 + 1e-8);
    EXPECT_GE(j, 0.0);
    EXPECT_LE(j, ln2 + 1e-12);
    EXPECT_EQ(j, jsd(q, p));
  }
}

TEST(FunctionalDerivative, VanishesAtTarget) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rd = sampled(TargetModel::gaussian(0, 1), g);
  for (double x : functional_derivative_J(rd, rd)) EXPECT_EQ(x, 0.0);
}

TEST(FunctionalDerivative, ThreeTimesTargetIsHalfLogThreeHalves) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rd = sampled(TargetModel::gaussian(0, 1), g);
  std::vector<double> three(g.n);
  for (std::size_t i = 0; i < g.n; ++i) three[i] = 3.0 * rd[i];
  for (double x : functional_derivative_J(GridDensity(g, three), rd)) EXPECT_NEAR(x, 0.5 * std::log(1.5), 1e-14);
  EXPECT_NEAR(0.5 * std::log(1.5), 0.202733, 1e-6);
}

TEST(FunctionalDerivative, ZeroTargetNodeIsAPositivityError) {
  const auto g = Grid::uniform(-1, 1, 5);
  const GridDensity rd(g, {0.0, 0.5, 0.5, 0.5, 0.5});
  EXPECT_THROW(functional_derivative_J(rd, rd), PositivityError);
}

TEST(Drift, ConstantRatiosAreStationary) {
  const auto g = Grid::uniform(-8, 8, 401);
  for (double c : {1.0, 0.3, 7.0}) {
    const auto b = descent_drift(RatioField(g, std::vector<double>(g.n, c)));
    for (double x : b.values) EXPECT_EQ(x, 0.0);
  }
  const std::vector<double> half(g.n, 0.5);
  const std::vector<double> flat(g.n, 0.0);
  for (double x : drift_from_discriminator(g, half, flat).values) EXPECT_EQ(x, 0.0);
}

TEST(Drift, RatioBelowFloorNamesTheNodes) {
  const auto g = Grid::uniform(-1, 1, 5);
  try {
    descent_drift(RatioField(g, {1.0, 0.0, 1.0, 1.0, 0.0}));
    FAIL() << "expected a drift-singularity error";
  } catch (const DriftSingularityError& e) {
    EXPECT_EQ(e.nodes(), (std::vector<std::size_t>{1, 4}));
  }
}

TEST(Drift, SaturatedDiscriminatorIsAnError) {
  const auto g = Grid::uniform(-1, 1, 5);
  const std::vector<double> d{0.5, 0.5, 1.0, 0.5, 0.5};
  const std::vector<double> gd(5, 0.0);
  EXPECT_THROW(drift_from_discriminator(g, d, gd), SaturationError);
}

TEST(Drift, LogisticDiscriminatorGivesHalfSigmoid) {
  const auto g = Grid::uniform(-4, 4, 81);
  std::vector<double> d(g.n);
  std::vector<double> gd(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    d[i] = sigmoid(g.node(i));
    gd[i] = d[i] * (1.0 - d[i]);
  }
  const auto b = drift_from_discriminator(g, d, gd);
  EXPECT_NEAR(b.values[40], 0.25, 1e-15);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(b.values[i], 0.5 * d[i], 1e-14);
}

TEST(Drift, RatioAndDiscriminatorFormsAgreeForGaussianShift) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rd = sampled(TargetModel::gaussian(0, 1), g);
  const auto r0 = sampled(TargetModel::gaussian(1, 1), g);
  const auto v = ratio_of(r0, rd);
  const auto a = descent_drift(v);
  const auto disc = discriminator_from_ratio(v);
  const auto b = drift_from_discriminator(g, disc.d, disc.grad_d);
  for (std::size_t i = 1; i + 1 < g.n; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-10) << "node " << i;
}

TEST(Drift, ExactDensityDiscriminatorMatchesClosedForm) {
  // rho_0 = N(1,1), rho_d = N(0,1): v = exp(y - 1/2), so the drift is -1/(2 (1 + v))
  const auto g = Grid::uniform(-8, 8, 401);
  std::vector<double> d(g.n);
  std::vector<double> gd(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double y = g.node(i);
    const double v = std::exp(y - 0.5);
    d[i] = 1.0 / (1.0 + v);
    gd[i] = -v / ((1.0 + v) * (1.0 + v));
  }
  const auto b = drift_from_discriminator(g, d, gd);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_NEAR(b.values[i], -0.5 / (1.0 + std::exp(g.node(i) - 0.5)), 1e-10);
}

TEST(Drift, FormsAgreeOnRandomRatioFields) {
  const auto g = Grid::uniform(-8, 8, 401);
  Rng rng(77);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const RatioField v(g, gflow::detail::random_smooth_field(g, 3.0, rng));
    const auto a = descent_drift(v);
    const auto disc = discriminator_from_ratio(v);
    const auto b = drift_from_discriminator(g, disc.d, disc.grad_d);
    for (std::size_t i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(a.values[i] - b.values[i]));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(Pushforward, ZeroFieldIsBitExactIdentity) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rho = sampled(TargetModel::gaussian(0.3, 1.2), g);
  const auto out = pushforward_density(rho, std::vector<double>(g.n, 0.0), 0.1);
  for (std::size_t i = 0; i < g.n; ++i) EXPECT_EQ(out[i], rho[i]);
}

TEST(Pushforward, ConstantFieldShifts) {
  const auto g = wide();
  const auto model = TargetModel::gaussian(0.0, 1.0);
  const auto rho = sampled(model, g);
  const double c = 0.7;
  const double eps = 0.2;
  std::vector<double> xi(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xi[i] = c * taper(g.node(i), 6.0, 9.5);
  const auto out = pushforward_density(rho, xi, eps);
  for (std::size_t i = 0; i < g.n; ++i) {
    const double y = g.node(i);
    if (std::abs(y) > 5.0) continue;
    EXPECT_NEAR(out[i], rho[i] * model.pdf(y - eps * c) / model.pdf(y), 1e-6) << "y = " << y;
  }
}

TEST(Pushforward, LinearFieldRescales) {
  const auto g = wide();
  const auto model = TargetModel::gaussian(0.0, 1.0);
  const auto rho = sampled(model, g);
  const double eps = 0.1;
  std::vector<double> xi(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xi[i] = g.node(i) * taper(g.node(i), 6.0, 9.5);
  const auto out = pushforward_density(rho, xi, eps);
  const double k = rho[1000] / model.pdf(0.0);  // discretization renormalization
  for (std::size_t i = 0; i < g.n; ++i) {
    const double y = g.node(i);
    if (std::abs(y) > 5.0) continue;
    EXPECT_NEAR(out[i], k * model.pdf(y / (1.0 + eps)) / (1.0 + eps), 1e-6) << "y = " << y;
  }
}

TEST(Pushforward, FoldingMapIsRejected) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rho = sampled(TargetModel::gaussian(0, 1), g);
  std::vector<double> xi(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xi[i] = std::sin(2.0 * g.node(i)) * taper(g.node(i), 5.0, 7.5);
  EXPECT_THROW(pushforward_density(rho, xi, 2.0), InvalidTransportError);
  std::vector<double> open(g.n, 1.0);
  EXPECT_THROW(pushforward_density(rho, open, 0.1), InvalidTransportError);
}

TEST(FirstVariation, ZeroFieldAndMinimizer) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto rd = sampled(TargetModel::gaussian(0, 1), g);
  const auto r1 = sampled(TargetModel::gaussian(1, 1), g);
  const auto zero = directional_derivative_check(r1, rd, std::vector<double>(g.n, 0.0), 0.01);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs, 0.0);

  std::vector<double> xi(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xi[i] = std::sin(g.node(i)) * taper(g.node(i), 4.0, 7.5);
  const auto at_min = directional_derivative_check(rd, rd, xi, 0.01);
  EXPECT_EQ(at_min.rhs, 0.0);
  // J is quadratic at its minimizer, so the difference quotient itself is O(eps)
  EXPECT_LT(std::abs(at_min.lhs), 2e-3);
  EXPECT_LT(std::abs(directional_derivative_check(rd, rd, xi, 0.005).lhs), 0.6 * std::abs(at_min.lhs));
}

TEST(FirstVariation, ErrorShrinksAtFirstOrder) {
  const auto g = Grid::uniform(-8, 8, 801);
  const auto rd = sampled(TargetModel::gaussian(0, 1), g);
  const auto r1 = sampled(TargetModel::gaussian(1, 1), g);
  std::vector<double> xi(g.n);
  for (std::size_t i = 0; i < g.n; ++i) xi[i] = std::exp(-0.5 * (g.node(i) - 0.5) * (g.node(i) - 0.5)) * taper(g.node(i), 5.0, 7.5);
  for (double eps : {0.04, 0.02}) {
    const auto a = directional_derivative_check(r1, rd, xi, eps);
    const auto b = directional_derivative_check(r1, rd, xi, 0.5 * eps);
    const double ratio = std::abs(a.lhs - a.rhs) / std::abs(b.lhs - b.rhs);
    EXPECT_GE(ratio, 1.7) << "eps = " << eps;
  }
}
