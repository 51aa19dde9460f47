#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "gflow/mlp.hpp"
#include "gflow/rng.hpp"

using namespace gflow;

namespace {

// L = sum_k c_k out_k over a batch; returns (L, dL/dtheta) via backprop
double weighted_output(const Mlp& net, const std::vector<double>& x, std::size_t rows, const std::vector<double>& c) {
  const Tape t = net.forward_batch(x, rows);
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * t.output()[k];
  return s;
}

void check_gradient(Activation hidden, Activation output, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t rows = 5;
  auto net = Mlp::random({2, 6, 5, output == Activation::sigmoid ? 1u : 2u}, hidden, output, seed, 1.3);
  for (double& p : net.parameters()) p += 0.1 * rng.normal();  // nonzero biases too
  std::vector<double> x(rows * 2);
  for (double& v : x) v = rng.normal();
  std::vector<double> c(rows * net.output_dim());
  for (double& v : c) v = rng.normal();

  const Tape t = net.forward_batch(x, rows);
  std::vector<double> grad(net.parameter_count(), 0.0);
  std::vector<double> grad_x(x.size(), 0.0);
  net.backward(t, c, grad, grad_x);

  const double h = 1e-5;
  double scale = 0.0;
  for (double g : grad) scale = std::max(scale, std::abs(g));
  for (std::size_t k = 0; k < net.parameter_count(); ++k) {
    auto plus = net;
    auto minus = net;
    plus.parameters()[k] += h;
    minus.parameters()[k] -= h;
    const double fd = (weighted_output(plus, x, rows, c) - weighted_output(minus, x, rows, c)) / (2.0 * h);
    EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(std::abs(fd), scale)) << "parameter " << k;
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto xp = x;
    auto xm = x;
    xp[k] += h;
    xm[k] -= h;
    const double fd = (weighted_output(net, xp, rows, c) - weighted_output(net, xm, rows, c)) / (2.0 * h);
    EXPECT_NEAR(grad_x[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "input " << k;
  }
}

} // namespace

TEST(Mlp, ZeroWeightsGiveTheFinalBias) {
  Mlp net({3, 4, 2}, Activation::tanh, Activation::identity);
  auto p = net.parameters();
  p[p.size() - 2] = 1.25;
  p[p.size() - 1] = -0.5;
  const auto out = net(std::vector<double>{0.3, -2.0, 7.0});
  EXPECT_EQ(out, (std::vector<double>{1.25, -0.5}));
}

TEST(Mlp, ZeroSigmoidNetIsOneHalf) {
  const Mlp net({1, 8, 1}, Activation::relu, Activation::sigmoid);
  EXPECT_EQ(net(std::vector<double>{4.2})[0], 0.5);
}

TEST(Mlp, ForwardIsDeterministic) {
  const auto net = Mlp::random({1, 32, 32, 1}, Activation::tanh, Activation::identity, 9);
  const std::vector<double> x{0.37};
  EXPECT_EQ(net(x), net(x));
  EXPECT_EQ(Mlp::random({1, 32, 32, 1}, Activation::tanh, Activation::identity, 9).parameters()[17],
            net.parameters()[17]);
}

TEST(Mlp, BackpropMatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    check_gradient(Activation::tanh, Activation::identity, seed);
    check_gradient(Activation::tanh, Activation::sigmoid, seed + 100);
  }
}

TEST(Mlp, ReluBackpropAwayFromKinks) {
  check_gradient(Activation::relu, Activation::identity, 42);
}

TEST(Mlp, BatchEqualsRowByRow) {
  const auto net = Mlp::random({2, 7, 1}, Activation::tanh, Activation::sigmoid, 3);
  const std::vector<double> x{0.1, 0.2, -1.0, 0.5, 2.0, -0.3};
  const Tape t = net.forward_batch(x, 3);
  for (std::size_t r = 0; r < 3; ++r)
    EXPECT_EQ(t.output()[r], net(std::vector<double>{x[2 * r], x[2 * r + 1]})[0]);
}

TEST(Mlp, SnapshotRoundTrip) {
  const auto net = Mlp::random({1, 5, 3, 1}, Activation::relu, Activation::sigmoid, 77);
  std::stringstream ss;
  net.save(ss);
  const Mlp back = Mlp::load(ss);
  EXPECT_EQ(back.layer_sizes(), net.layer_sizes());
  EXPECT_EQ(back.hidden_activation(), Activation::relu);
  EXPECT_EQ(back.output_activation(), Activation::sigmoid);
  EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(), back.parameters().begin()));
}

TEST(Mlp, ShapeErrors) {
  EXPECT_THROW(Mlp({3}, Activation::tanh, Activation::identity), DimensionError);
  EXPECT_THROW(Mlp({1, 4, 2}, Activation::tanh, Activation::sigmoid), DimensionError);
  const Mlp net({2, 3, 1}, Activation::tanh, Activation::identity);
  EXPECT_THROW(net.forward(std::vector<double>{1.0}), DimensionError);
  std::istringstream bad("mlp 1 2 | tanh identity\n0.5\n");
  EXPECT_THROW(Mlp::load(bad), std::invalid_argument);
}
