#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "realism/error.hpp"
#include "realism/numerics.hpp"

using namespace realism;

TEST(Matmul, IdentityLeavesMatrix) {
  const Matrix m{{1, 2}, {3, 4}};
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matmul, ProjectsFirstCoordinate) {
  const Matrix p{{1, 0}, {0, 0}};
  const Matrix v{{5}, {7}};
  EXPECT_EQ(matmul(p, v), (Matrix{{5}, {0}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = Matrix::gaussian(3, 4, 1.0, rng);
    const Matrix b = Matrix::gaussian(4, 2, 1.0, rng);
    oracle::Grid ga(3, std::vector<double>(4)), gb(4, std::vector<double>(2));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) ga[i][j] = a(i, j);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) gb[i][j] = b(i, j);
    const auto want = oracle::naive_matmul(ga, gb);
    const Matrix got = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12);
  }
}

TEST(Matmul, TransposedVariantsAgree) {
  Rng rng(3);
  const Matrix a = Matrix::gaussian(5, 3, 1.0, rng);
  const Matrix b = Matrix::gaussian(5, 4, 1.0, rng);
  const Matrix c = Matrix::gaussian(6, 3, 1.0, rng);
  const Matrix tn = matmul_tn(a, b), tn_ref = matmul(transpose(a), b);
  const Matrix nt = matmul_nt(a, c), nt_ref = matmul(a, transpose(c));
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.values()[i], tn_ref.values()[i], 1e-12);
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.values()[i], nt_ref.values()[i], 1e-12);
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(Softmax, Examples) {
  auto half = softmax(std::vector<double>{0, 0});
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  auto third = softmax(std::vector<double>{2.5, 2.5, 2.5});
  for (double v : third) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  auto q = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  EXPECT_NEAR(q[0], 0.25, 1e-15);
  EXPECT_NEAR(q[1], 0.75, 1e-15);
}

TEST(Softmax, StableForLargeLogits) {
  auto p = softmax(std::vector<double>{1000, 0});
  EXPECT_TRUE(std::isfinite(p[0]));
  EXPECT_NEAR(p[0], 1.0, 1e-15);
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(std::vector<double>{30, -30}, 0).loss, 0.0, 1e-20);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0, 0}, 1).loss, std::log(2.0), 1e-15);
  auto masked = cross_entropy(std::vector<double>{3, -7}, 1, true);
  EXPECT_EQ(masked.loss, 0.0);
  for (double g : masked.grad) EXPECT_EQ(g, 0.0);
}

TEST(CrossEntropy, GradientMatchesFiniteDifference) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> logits(4);
    for (double& v : logits) v = rng.normal();
    const std::size_t target = rng.index(4);
    const auto analytic = cross_entropy(logits, target).grad;
    const auto numeric = oracle::central_difference(
        [&](const std::vector<double>& x) { return cross_entropy(x, target).loss; }, logits);
    for (std::size_t i = 0; i < 4; ++i) {
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LT(std::abs(analytic[i] - numeric[i]) / denom, 1e-4);
    }
  }
}

TEST(Adam, ZeroGradientIsNoOp) {
  std::vector<double> theta{1.5, -2.0};
  AdamState state(2, AdamConfig{});
  adam_step(theta, std::vector<double>{0, 0}, state);
  EXPECT_EQ(theta, (std::vector<double>{1.5, -2.0}));
  EXPECT_EQ(state.first_moment, (std::vector<double>{0, 0}));
  EXPECT_EQ(state.second_moment, (std::vector<double>{0, 0}));
}

TEST(Adam, FirstStepHandValue) {
  std::vector<double> theta{1.0};
  AdamState state(1, AdamConfig{.learning_rate = 0.1});
  adam_step(theta, std::vector<double>{1.0}, state);
  EXPECT_NEAR(theta[0], 1.0 - 0.1 * (1.0 / (1.0 + 1e-8)), 1e-12);
}

TEST(Adam, ConstantGradientMovesMonotonically) {
  std::vector<double> theta{0.0};
  AdamState state(1, AdamConfig{.learning_rate = 0.05});
  adam_step(theta, std::vector<double>{-2.0}, state);
  const double after_one = theta[0];
  adam_step(theta, std::vector<double>{-2.0}, state);
  EXPECT_GT(after_one, 0.0);
  EXPECT_GT(theta[0], after_one);
}

TEST(GradCheck, QuadraticClosedForm) {
  LossWithGrad quad = [](std::span<const double> p, Vector* g) {
    if (g) *g = {2 * p[0], 2 * p[1]};
    return p[0] * p[0] + p[1] * p[1];
  };
  const auto r = grad_check(quad, std::vector<double>{1, 2}, 1e-7);
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-7);
}

TEST(GradCheck, FlagsWrongGradient) {
  LossWithGrad wrong = [](std::span<const double> p, Vector* g) {
    if (g) *g = {3 * p[0]};
    return p[0] * p[0];
  };
  EXPECT_FALSE(grad_check(wrong, std::vector<double>{1.0}, 1e-4).passed);
}

TEST(Mlp, BackwardMatchesFiniteDifference) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const std::vector<std::size_t> dims{4, 6, 3};
    MlpParams net = make_mlp(dims, seed % 2 ? Activation::tanh : Activation::relu, rng);
    std::vector<double> x(4);
    for (double& v : x) v = rng.normal();
    const std::size_t target = rng.index(3);
    LossWithGrad fn = [&](std::span<const double> flat, Vector* g) {
      MlpParams p = net;
      unflatten(p, flat);
      MlpTrace trace;
      const Vector logits = mlp_forward(p, x, &trace);
      const auto ce = cross_entropy(logits, target);
      if (g) {
        MlpParams grads = zeros_like(p);
        mlp_backward(p, trace, ce.grad, grads);
        *g = flatten(grads);
      }
      return ce.loss;
    };
    EXPECT_TRUE(grad_check(fn, flatten(net), 1e-4).passed) << "seed " << seed;
  }
}

TEST(Mlp, FlattenRoundTrip) {
  Rng rng(9);
  const std::vector<std::size_t> dims{3, 5, 2};
  MlpParams a = make_mlp(dims, Activation::relu, rng);
  MlpParams b = zeros_like(a);
  unflatten(b, flatten(a));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.parameter_count(), 3u * 5 + 5 + 5 * 2 + 2);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a(42, 1), b(42, 1), c(42, 2);
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1234);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 5e-3);
  EXPECT_NEAR(sn / n, 0.0, 1e-2);
  EXPECT_NEAR(sn2 / n, 1.0, 2e-2);
}
