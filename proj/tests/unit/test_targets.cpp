#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "gflow/particles.hpp"
#include "gflow/targets.hpp"
#include "oracles/frozen_oracles.hpp"

using namespace gflow;

namespace {

TargetModel symmetric_mixture() { return TargetModel::mixture({{0.5, -2.0, 1.0}, {0.5, 2.0, 1.0}}); }

double ks_statistic(std::vector<double> xs, const TargetModel& m) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = m.cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

} // namespace

TEST(TargetPdf, ClosedFormValues) {
  EXPECT_NEAR(TargetModel::gaussian(0, 1).pdf(0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(TargetModel::cauchy(0, 1).pdf(0.0), 1.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(symmetric_mixture().pdf(0.0), oracle::mixture_pdf_0, 1e-15);
  EXPECT_NEAR(symmetric_mixture().pdf(0.0), 0.0539910, 1e-7);
  EXPECT_NEAR(TargetModel::logistic(0, 1).pdf(0.0), 0.25, 1e-15);
}

TEST(TargetPdf, LogPdfIsFiniteFarInTheTails) {
  const auto g = TargetModel::gaussian(0, 1);
  EXPECT_NEAR(g.log_pdf(60.0), -0.5 * 3600.0 - 0.5 * std::log(2.0 * std::numbers::pi), 1e-9);
  EXPECT_TRUE(std::isfinite(symmetric_mixture().log_pdf(-80.0)));
  EXPECT_TRUE(std::isfinite(TargetModel::logistic(0, 1).log_pdf(900.0)));
}

TEST(TargetScore, ClosedForms) {
  EXPECT_DOUBLE_EQ(TargetModel::gaussian(0, 1).grad_log_pdf(2.0), -2.0);
  EXPECT_EQ(TargetModel::logistic(0, 1).grad_log_pdf(0.0), 0.0);
  EXPECT_NEAR(TargetModel::cauchy(0, 1).grad_log_pdf(1.0), -1.0, 1e-15);
}

TEST(TargetScore, MatchesFiniteDifferenceOfLogPdf) {
  const double h = 1e-5;
  const std::vector<TargetModel> models{symmetric_mixture(), TargetModel::logistic(0.5, 1.5),
                                        TargetModel::cauchy(-1, 0.5),
                                        TargetModel::mixture({{0.2, -3, 0.5}, {0.3, 0, 1}, {0.5, 3, 0.7}})};
  for (const auto& m : models)
    for (double y : {-2.3, 0.0, 0.7, 1.9}) {
      const double fd = (m.log_pdf(y + h) - m.log_pdf(y - h)) / (2.0 * h);
      EXPECT_NEAR(m.grad_log_pdf(y), fd, 1e-8) << m.describe() << " at " << y;
    }
}

TEST(TargetSampling, GaussianMomentsFollowTheLawOfLargeNumbers) {
  const auto xs = TargetModel::gaussian(0, 1).sample(11, 100000);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(TargetSampling, SameSeedSameDraws) {
  for (const auto& m : {symmetric_mixture(), TargetModel::cauchy(0, 1), TargetModel::logistic(0, 1)}) {
    EXPECT_EQ(m.sample(5, 1000), m.sample(5, 1000));
    EXPECT_NE(m.sample(5, 1000), m.sample(6, 1000));
  }
}

TEST(TargetSampling, KolmogorovSmirnovAgainstClosedFormCdf) {
  EXPECT_LT(ks_statistic(symmetric_mixture().sample(3, 100000), symmetric_mixture()), 0.01);
  EXPECT_LT(ks_statistic(TargetModel::logistic(1, 2).sample(3, 100000), TargetModel::logistic(1, 2)),
            oracle::ks_critical_1e5);
  EXPECT_LT(ks_statistic(TargetModel::cauchy(0, 1).sample(3, 100000), TargetModel::cauchy(0, 1)),
            oracle::ks_critical_1e5);
}

TEST(TargetSampling, InvalidParametersAreRejected) {
  EXPECT_THROW(TargetModel::gaussian(0, 0), std::invalid_argument);
  EXPECT_THROW(TargetModel::mixture({{0.5, 0, 1}, {0.4, 1, 1}}), std::invalid_argument);
  EXPECT_THROW(TargetModel::mixture({}), std::invalid_argument);
  EXPECT_THROW(TargetModel::cauchy(0, -1), std::invalid_argument);
}

TEST(Discretize, GaussianMassIsOne) {
  const auto d = discretize(TargetModel::gaussian(0, 1), Grid::uniform(-8, 8, 401));
  EXPECT_NEAR(d.density.mass(), 1.0, 1e-12);
  EXPECT_NEAR(d.renormalization, 1.0, 1e-8);
}

TEST(Discretize, CauchyRenormalizationIsStored) {
  const auto d = discretize(TargetModel::cauchy(0, 1), Grid::uniform(-50, 50, 20001));
  EXPECT_NEAR(1.0 / d.truncated_mass, oracle::cauchy_renorm_50, 1e-14);
  EXPECT_NEAR(d.renormalization, oracle::cauchy_renorm_50, 1e-6);
}

TEST(Discretize, NarrowWindowIsRejected) {
  EXPECT_THROW(discretize(TargetModel::gaussian(0, 1), Grid::uniform(-2, 2, 101)), WindowTooNarrowError);
  EXPECT_THROW(discretize(TargetModel::logistic(0, 1), Grid::uniform(-5, 5, 101)), WindowTooNarrowError);
  // heavy tails: renormalized on the window instead of rejected
  const auto c = discretize(TargetModel::cauchy(0, 1), Grid::uniform(-5, 5, 1001));
  EXPECT_NEAR(c.density.mass(), 1.0, 1e-12);
  EXPECT_GT(c.renormalization, 1.1);
}

TEST(Discretize, EachMixtureModeCarriesItsWeight) {
  const auto g = Grid::uniform(-8, 8, 401);
  const auto d = discretize(TargetModel::mixture({{0.3, -4.0, 0.5}, {0.7, 4.0, 0.5}}), g).density;
  const auto w = trapezoid_weights(g);
  double left = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    if (g.node(i) < 0.0) left += w[i] * d[i];
    else if (g.node(i) == 0.0) left += 0.5 * g.h * d[i];
  }
  EXPECT_NEAR(left, oracle::separated_mixture_left_mass, 1e-6);
  EXPECT_NEAR(d.mass() - left, 1.0 - oracle::separated_mixture_left_mass, 1e-6);
}

TEST(Discretize, FisherInformation) {
  const auto g = Grid::uniform(-8, 8, 401);
  EXPECT_NEAR(fisher_information(TargetModel::gaussian(0, 1), g), oracle::fisher_n01_window, 1e-9);
  EXPECT_NEAR(fisher_information(TargetModel::logistic(0, 1), g), oracle::fisher_logistic_window, 1e-5);
}

TEST(Ensemble, InitialEnsembleStatistics) {
  const auto one = init_ensemble(ProductModel(TargetModel::gaussian(0, 1)), 1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(std::isfinite(one.positions[0]));

  const auto e = init_ensemble(ProductModel(TargetModel::gaussian(2.0, 0.7)), 100000, 9);
  double mean = 0.0;
  for (double x : e.positions) mean += x;
  EXPECT_NEAR(mean / 100000.0, 2.0, 0.02);
  EXPECT_EQ(e.positions, init_ensemble(ProductModel(TargetModel::gaussian(2.0, 0.7)), 100000, 9).positions);
}
