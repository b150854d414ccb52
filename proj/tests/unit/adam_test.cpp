#include <gtest/gtest.h>

#include "tfq/nn/adam.hpp"

using namespace tfq::nn;

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Tensor> p{Tensor({3}, std::vector<double>{1, -2, 3})};
  const auto before = p;
  AdamState s;
  adam_step(p, {Tensor({3})}, s);
  EXPECT_EQ(p[0].data, before[0].data);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  std::vector<Tensor> p{Tensor({4}, 0.0)};
  AdamState s;
  adam_step(p, {Tensor({4}, std::vector<double>{0.5, -3.0, 1e-3, -7.0})}, s);
  const double expected[] = {-1e-4, 1e-4, -1e-4, 1e-4};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(p[0][i], expected[i], 1e-4 * 1e-4);
}

TEST(Adam, ZeroLearningRateStillUpdatesMoments) {
  std::vector<Tensor> p{Tensor({2}, 1.0)};
  AdamState s;
  s.lr = 0.0;
  adam_step(p, {Tensor({2}, 2.0)}, s);
  EXPECT_EQ(p[0].data, (Buffer{1.0, 1.0}));
  EXPECT_NEAR(s.m[0][0], 0.2, 1e-15);
  EXPECT_NEAR(s.v[0][0], 0.004, 1e-15);
}

TEST(Adam, MatchesReferenceRecurrence) {
  std::vector<Tensor> p{Tensor({1}, 0.3)};
  AdamState s;
  s.lr = 0.01;
  double theta = 0.3, m = 0, v = 0;
  const double gs[] = {0.5, -0.2, 0.9, 0.1, -1.5};
  for (int t = 1; t <= 5; ++t) {
    const double g = gs[t - 1];
    adam_step(p, {Tensor({1}, g)}, s);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    theta -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(p[0][0], theta, 1e-14);
  }
}

TEST(Adam, ShapeMismatch) {
  std::vector<Tensor> p{Tensor({2})};
  AdamState s;
  EXPECT_THROW(adam_step(p, {Tensor({3})}, s), tfq::DimensionError);
  EXPECT_THROW(adam_step(p, {}, s), tfq::DimensionError);
}
