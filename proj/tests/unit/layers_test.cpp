#include <gtest/gtest.h>

#include "tfq/nn/gradcheck.hpp"
#include "tfq/nn/layers.hpp"

using namespace tfq;
using namespace tfq::nn;

TEST(Conv, OneByOneIdentity) {
  Rng rng(1);
  const Tensor x = nn::detail::random_tensor({1, 4, 5}, rng);
  const Tensor y = conv2d_forward(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 0, 1);
  EXPECT_EQ(y.shape, x.shape);
  EXPECT_EQ(y.data, x.data);
}

TEST(Conv, ZeroWeightsGiveBias) {
  Rng rng(2);
  const Tensor x = nn::detail::random_tensor({3, 6, 6}, rng);
  const Tensor y = conv2d_forward(x, Tensor({2, 3, 3, 3}), Tensor({2}, std::vector<double>{0.5, -2.0}), 1, 1);
  ASSERT_EQ(y.shape, (Shape{2, 6, 6}));
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_EQ(y[i], 0.5);
    EXPECT_EQ(y[36 + i], -2.0);
  }
}

TEST(Conv, OnesKernelCountsNeighbours) {
  const Tensor y = conv2d_forward(Tensor({1, 3, 3}, 1.0), Tensor({1, 1, 3, 3}, 1.0), Tensor({1}), 1, 1);
  EXPECT_EQ(y.at(0, 1, 1), 9.0);
  EXPECT_EQ(y.at(0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 1), 6.0);
  EXPECT_EQ(y.at(0, 2, 2), 4.0);
}

TEST(Conv, MatchesDirectLoopWithStride) {
  Rng rng(3);
  const Tensor x = nn::detail::random_tensor({2, 7, 6}, rng);
  const Tensor w = nn::detail::random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = nn::detail::random_tensor({3}, rng);
  const std::size_t pad = 1, stride = 2;
  const Tensor y = conv2d_forward(x, w, b, pad, stride);
  ASSERT_EQ(y.shape, (Shape{3, 4, 3}));
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t oy = 0; oy < 4; ++oy) {
      for (std::size_t ox = 0; ox < 3; ++ox) {
        double s = b[o];
        for (std::size_t c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = static_cast<int>(oy * stride) + ky - 1, ix = static_cast<int>(ox * stride) + kx - 1;
              if (iy < 0 || ix < 0 || iy >= 7 || ix >= 6) continue;
              s += w[((o * 2 + c) * 3 + ky) * 3 + kx] * x.at(c, iy, ix);
            }
        EXPECT_NEAR(y.at(o, oy, ox), s, 1e-12);
      }
    }
  }
}

TEST(Conv, ShapeMismatchNamesLayer) {
  try {
    conv2d_forward(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 1, "C9");
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("C9"), std::string::npos);
  }
  EXPECT_THROW(conv2d_forward(Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), Tensor({2}), 1, 1), DimensionError);
}

TEST(MaxPool, WindowMaxAndArgmax) {
  const Tensor x({1, 2, 2}, std::vector<double>{1, 2, 3, 4});
  const auto r = maxpool2x2_forward(x);
  EXPECT_EQ(r.output.shape, (Shape{1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3u);  // (1,1)
}

TEST(MaxPool, TiesGoToFirst) {
  const auto r = maxpool2x2_forward(Tensor({2, 4, 4}, 7.0));
  for (double v : r.output.data) EXPECT_EQ(v, 7.0);
  // first element of each window in row-major order, i.e. (0,0) of the window
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t oy = 0; oy < 2; ++oy)
      for (std::size_t ox = 0; ox < 2; ++ox) {
        EXPECT_EQ(r.argmax[(c * 2 + oy) * 2 + ox], (c * 4 + 2 * oy) * 4 + 2 * ox);
      }
}

TEST(MaxPool, BackwardRoutesToArgmax) {
  const Tensor x({1, 2, 4}, std::vector<double>{0, 5, 1, 1, 2, 3, 9, 0});
  const auto r = maxpool2x2_forward(x);
  const Tensor g = maxpool2x2_backward(Tensor({1, 1, 2}, 1.0), r.argmax, x.shape);
  EXPECT_EQ(g.data, (Buffer{0, 1, 0, 0, 0, 0, 1, 0}));
}

TEST(MaxPool, OddDimensionsRejected) {
  EXPECT_THROW(maxpool2x2_forward(Tensor({1, 3, 4})), DimensionError);
  EXPECT_THROW(maxpool2x2_forward(Tensor({1, 4, 5})), DimensionError);
}

TEST(Relu, ForwardBackward) {
  const Tensor x({3}, std::vector<double>{-3, 2, 0});
  EXPECT_EQ(relu_forward(x).data, (Buffer{0, 2, 0}));
  EXPECT_EQ(relu_backward(x, Tensor({3}, 5.0)).data, (Buffer{0, 5, 0}));
}

TEST(Fc, HandMultiply) {
  const Tensor y = fc_forward(Tensor({2}, std::vector<double>{1, 2}), Tensor({2, 2}, std::vector<double>{1, 1, 0, 1}),
                              Tensor({2}, std::vector<double>{0, 1}));
  EXPECT_EQ(y.data, (Buffer{3, 3}));
}

TEST(Fc, IdentityAndMismatch) {
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.data[i * 4] = 1;
  const Tensor x({3}, std::vector<double>{0.1, -2, 7});
  EXPECT_EQ(fc_forward(x, eye, Tensor({3})).data, x.data);
  EXPECT_THROW(fc_forward(Tensor({4}), eye, Tensor({3})), DimensionError);
}

TEST(Fc, BackwardByHand) {
  const Tensor x({2}, std::vector<double>{1, 2});
  const Tensor w({2, 2}, std::vector<double>{1, 1, 0, 1});
  const auto g = fc_backward(x, w, Tensor({2}), Tensor({2}, std::vector<double>{1, -1}));
  EXPECT_EQ(g.input.data, (Buffer{1, 0}));        // W^T g
  EXPECT_EQ(g.weight.data, (Buffer{1, 2, -1, -2}));  // g x^T
  EXPECT_EQ(g.bias.data, (Buffer{1, -1}));
}

TEST(Gradcheck, EveryLayerBelowTolerance) {
  Rng rng(21);
  for (auto [pad, stride] : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 1}, {2, 1}, {1, 2}}) {
    const auto r = gradcheck_conv(rng, pad, stride);
    EXPECT_TRUE(r.passed) << r.name << " " << r.rel_error;
    EXPECT_LT(r.rel_error, 1e-4);
  }
  for (const auto& r : {gradcheck_maxpool(rng), gradcheck_fc(rng), gradcheck_relu(rng), gradcheck_contrastive(),
                        gradcheck_siamese(rng, 0), gradcheck_siamese(rng, 1)}) {
    EXPECT_TRUE(r.passed) << r.name << " " << r.rel_error;
    EXPECT_GT(r.checked, 0u) << r.name;
  }
}

TEST(Gradcheck, DetectsWrongGradient) {
  Buffer x{0.3, -0.7};
  auto f = [&] { return x[0] * x[0] + 3 * x[1]; };
  const auto num = numeric_gradient(x, f);
  EXPECT_NEAR(num[0], 0.6, 1e-8);
  EXPECT_NEAR(num[1], 3.0, 1e-8);
  EXPECT_LT(relative_error({0.6, 3.0}, num), 1e-8);
  EXPECT_GT(relative_error({0.6, 3.1}, num), 1e-4);
}
