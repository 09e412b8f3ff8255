#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lstmviz/numerics.hpp"

using namespace lstmviz;

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Vector p(3);
  p << 0.5, -1.0, 2.0;
  const Vector before = p;
  AdamState state(3);
  for (int i = 0; i < 7; ++i) adam_step(p, Vector::Zero(3), state);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 7);
}

TEST(Adam, FirstStepOnUnitGradient) {
  // m_hat = v_hat = 1 after one step, so the move is -lr / (1 + eps).
  Vector p = Vector::Zero(1);
  AdamState state(1);
  const AdamHyper hyper;
  adam_step(p, Vector::Ones(1), state, hyper);
  EXPECT_NEAR(p[0], -hyper.lr / (1.0 + hyper.eps), 1e-12);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, ElementwiseIndependence) {
  Vector a = Vector::Constant(1, 0.3), b = Vector::Constant(1, 0.3);
  Vector pair = Vector::Constant(2, 0.3);
  AdamState sa(1), sb(1), sp(2);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    const double ga = g(rng), gb = g(rng);
    adam_step(a, Vector::Constant(1, ga), sa);
    adam_step(b, Vector::Constant(1, gb), sb);
    Vector gp(2);
    gp << ga, gb;
    adam_step(pair, gp, sp);
  }
  EXPECT_EQ(pair[0], a[0]);
  EXPECT_EQ(pair[1], b[0]);
}

TEST(Adam, PermutationInvariance) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  Vector p(5), q(5);
  for (int i = 0; i < 5; ++i) p[i] = g(rng);
  const std::vector<int> perm{3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) q[i] = p[perm[i]];
  AdamState sp(5), sq(5);
  for (int step = 0; step < 10; ++step) {
    Vector gp(5), gq(5);
    for (int i = 0; i < 5; ++i) gp[i] = g(rng);
    for (int i = 0; i < 5; ++i) gq[i] = gp[perm[i]];
    adam_step(p, gp, sp);
    adam_step(q, gq, sq);
  }
  for (int i = 0; i < 5; ++i) EXPECT_EQ(q[i], p[perm[i]]);
}

TEST(Adam, Errors) {
  Vector p = Vector::Zero(2);
  AdamState state(2);
  EXPECT_THROW(adam_step(p, Vector::Zero(3), state), std::invalid_argument);
  Vector bad = Vector::Zero(2);
  bad[1] = std::nan("");
  try {
    adam_step(p, bad, state);
    FAIL() << "expected a throw";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
  }
}

TEST(Softmax, Examples) {
  const Vector u = softmax(Vector::Zero(4));
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(u[i], 0.25);

  Vector x(2);
  x << 0.0, std::log(3.0);
  const Vector p = softmax(x);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);

  Vector big(2);
  big << 1000.0, 1000.0;
  const Vector q = softmax(big);
  EXPECT_DOUBLE_EQ(q[0], 0.5);
  EXPECT_DOUBLE_EQ(q[1], 0.5);

  EXPECT_THROW(softmax(Vector()), std::invalid_argument);
}

TEST(Softmax, ValidDistributionAndShiftInvariant) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector x(1 + trial % 9);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = g(rng);
    const Vector p = softmax(x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GT(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
    const Vector shifted = softmax((x.array() + g(rng)).matrix());
    EXPECT_LT((shifted - p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CrossEntropy, Examples) {
  const Vector u = Vector::Constant(4, 0.25);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(cross_entropy(u, c), 1.3862944, 1e-7);
  Vector onehot = Vector::Zero(3);
  onehot[2] = 1.0;
  EXPECT_EQ(cross_entropy(onehot, 2), 0.0);
  Vector p(2);
  p << 0.1, 0.9;
  EXPECT_NEAR(cross_entropy(p, 0), 2.3025851, 1e-7);
  EXPECT_THROW(cross_entropy(p, 2), std::out_of_range);
}

TEST(Argmax, LowestIndexWinsTies) {
  Vector v(4);
  v << 1.0, 3.0, 3.0, 2.0;
  EXPECT_EQ(argmax(v), 1);
  EXPECT_EQ(argmax(Vector::Zero(5)), 0);
}

TEST(CheckGradient, Examples) {
  auto sq = [](const Vector& x) { return x.squaredNorm(); };
  Vector x(2);
  x << 1.0, 2.0;
  Vector grad(2);
  grad << 2.0, 4.0;
  EXPECT_LT(check_gradient(sq, x, grad, 1e-5), 1e-8);

  auto constant = [](const Vector&) { return 3.0; };
  EXPECT_EQ(check_gradient(constant, x, Vector::Zero(2), 1e-5), 0.0);

  EXPECT_NEAR(check_gradient(sq, x, 2.0 * grad, 1e-5), 0.5, 1e-6);
}

TEST(CheckGradient, PolynomialsPass) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector coef(4), x(3);
    for (auto& c : coef) c = u(rng);
    for (auto& v : x) v = u(rng);
    // f = a x0^3 + b x0 x1^2 + c x2^4 + d x1
    auto f = [&](const Vector& z) {
      return coef[0] * std::pow(z[0], 3) + coef[1] * z[0] * z[1] * z[1] +
             coef[2] * std::pow(z[2], 4) + coef[3] * z[1];
    };
    Vector g(3);
    g[0] = 3 * coef[0] * x[0] * x[0] + coef[1] * x[1] * x[1];
    g[1] = 2 * coef[1] * x[0] * x[1] + coef[3];
    g[2] = 4 * coef[2] * std::pow(x[2], 3);
    EXPECT_LT(check_gradient(f, x, g, 1e-5), 1e-6);
  }
}

TEST(CheckGradient, NonFiniteFunctionThrows) {
  EXPECT_THROW(check_gradient([](const Vector&) { return std::nan(""); }, Vector::Zero(1),
                              Vector::Zero(1)),
               std::domain_error);
}

TEST(MinMaxScale, DegenerateIsZero) {
  EXPECT_EQ(minmax_scale(Matrix::Constant(3, 2, 4.0)), Matrix::Zero(3, 2));
  Vector v(3);
  v << 2.0, 4.0, 3.0;
  const Matrix s = minmax_scale(v);
  EXPECT_DOUBLE_EQ(s(0), 0.0);
  EXPECT_DOUBLE_EQ(s(1), 1.0);
  EXPECT_DOUBLE_EQ(s(2), 0.5);
}
