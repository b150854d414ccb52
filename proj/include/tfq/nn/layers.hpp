#pragma once

// Forward and backward passes for the layer types of the metric network.
// Convolution lowers to im2col + GEMM; Eigen supplies the GEMM kernels.

#include <Eigen/Core>

#include <algorithm>
#include <string>
#include <vector>

#include "tfq/nn/tensor.hpp"

namespace tfq::nn {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace detail

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t out_channels, kernel;
  std::size_t pad, stride;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t patch() const { return channels * kernel * kernel; }
};

inline ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t pad,
                                  std::size_t stride, const std::string& layer) {
  if (input.rank() != 3) throw DimensionError(layer + ": input must be (C,H,W), got " + shape_string(input.shape));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw DimensionError(layer + ": weights must be (O,C,K,K), got " + shape_string(weight.shape));
  }
  if (weight.dim(1) != input.dim(0)) {
    throw DimensionError(layer + ": weights expect " + std::to_string(weight.dim(1)) + " input channels, got " +
                         std::to_string(input.dim(0)));
  }
  require_shape(bias, {weight.dim(0)}, layer + " bias");
  if (stride < 1) throw DimensionError(layer + ": stride must be positive");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weight.dim(0), weight.dim(2), pad, stride};
  if (g.height + 2 * pad < g.kernel || g.width + 2 * pad < g.kernel) {
    throw DimensionError(layer + ": kernel larger than padded input");
  }
  return g;
}

/// Patch matrix with one row per (c, ky, kx) and one column per output pixel.
inline Buffer im2col(const Tensor& input, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  Buffer cols(g.patch() * oh * ow, 0.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        double* dst = cols.data() + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            dst[oy * ow + ox] = input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
        }
      }
    }
  }
  return cols;
}

/// Scatter-adds a patch matrix back onto a (C,H,W) gradient.
inline void col2im(const Buffer& cols, const ConvGeometry& g, Tensor& grad_input) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const double* src = cols.data() + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            grad_input.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

/// Cross-correlation with zero padding: out[o] = bias[o] + sum_c W[o,c] * in[c].
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t pad,
                             std::size_t stride, const std::string& layer = "conv") {
  const ConvGeometry g = conv_geometry(input, weight, bias, pad, stride, layer);
  const std::size_t n = g.out_height() * g.out_width();
  const auto cols = im2col(input, g);
  Tensor out({g.out_channels, g.out_height(), g.out_width()});
  detail::MatMap y(out.data.data(), g.out_channels, n);
  y.noalias() = detail::ConstMatMap(weight.data.data(), g.out_channels, g.patch()) *
                detail::ConstMatMap(cols.data(), g.patch(), n);
  for (std::size_t o = 0; o < g.out_channels; ++o) y.row(o).array() += bias[o];
  return out;
}

/// Adds this layer's gradients into the accumulators. `grad_input` may be null
/// when the input gradient is not needed (first layer).
inline void conv2d_backward_accumulate(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                                       std::size_t pad, std::size_t stride, Tensor* grad_input,
                                       Tensor& grad_weight, Tensor& grad_bias, const std::string& layer = "conv") {
  const ConvGeometry g = conv_geometry(input, weight, grad_bias, pad, stride, layer);
  require_shape(grad_out, {g.out_channels, g.out_height(), g.out_width()}, layer + " output gradient");
  require_shape(grad_weight, weight.shape, layer + " weight gradient");
  const std::size_t n = g.out_height() * g.out_width();
  const auto cols = im2col(input, g);
  const detail::ConstMatMap dy(grad_out.data.data(), g.out_channels, n);
  detail::MatMap dw(grad_weight.data.data(), g.out_channels, g.patch());
  dw.noalias() += dy * detail::ConstMatMap(cols.data(), g.patch(), n).transpose();
  for (std::size_t o = 0; o < g.out_channels; ++o) grad_bias[o] += dy.row(o).sum();
  if (grad_input) {
    require_shape(*grad_input, input.shape, layer + " input gradient");
    Buffer dcols(g.patch() * n);
    detail::MatMap dc(dcols.data(), g.patch(), n);
    dc.noalias() = detail::ConstMatMap(weight.data.data(), g.out_channels, g.patch()).transpose() * dy;
    col2im(dcols, g, *grad_input);
  }
}

struct ConvGrads {
  Tensor input, weight, bias;
};

inline ConvGrads conv2d_backward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                 const Tensor& grad_out, std::size_t pad, std::size_t stride,
                                 const std::string& layer = "conv") {
  ConvGrads g{Tensor(input.shape), Tensor(weight.shape), Tensor(bias.shape)};
  conv2d_backward_accumulate(input, weight, grad_out, pad, stride, &g.input, g.weight, g.bias, layer);
  return g;
}

// Max pooling ------------------------------------------------------------

struct PoolResult {
  Tensor output;
  /// Flat input index of the maximum feeding each output element.
  std::vector<std::size_t> argmax;
};

/// 2x2, stride 2. Ties go to the first element in row-major window order.
inline PoolResult maxpool2x2_forward(const Tensor& input, const std::string& layer = "maxpool") {
  if (input.rank() != 3) throw DimensionError(layer + ": input must be (C,H,W), got " + shape_string(input.shape));
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError(layer + ": 2x2 pooling needs even height and width, got " + shape_string(input.shape));
  }
  PoolResult r{Tensor({c, h / 2, w / 2}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < h / 2; ++oy) {
      for (std::size_t ox = 0; ox < w / 2; ++ox, ++o) {
        std::size_t best = (ch * h + 2 * oy) * w + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

inline void maxpool2x2_backward_accumulate(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                                           Tensor& grad_input) {
  if (grad_out.size() != argmax.size()) throw DimensionError("maxpool: gradient/argmax size mismatch");
  for (std::size_t i = 0; i < argmax.size(); ++i) grad_input[argmax[i]] += grad_out[i];
}

inline Tensor maxpool2x2_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                                  const Shape& input_shape) {
  Tensor g(input_shape);
  maxpool2x2_backward_accumulate(grad_out, argmax, g);
  return g;
}

// ReLU ------------------------------------------------------------------

inline Tensor relu_forward(Tensor x) {
  for (double& v : x.data) v = v > 0.0 ? v : 0.0;
  return x;
}

/// Passes the gradient where the forward input was strictly positive.
inline Tensor relu_backward(const Tensor& input, Tensor grad_out) {
  if (input.size() != grad_out.size()) throw DimensionError("relu: gradient size mismatch");
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!(input[i] > 0.0)) grad_out[i] = 0.0;
  }
  return grad_out;
}

// Fully connected --------------------------------------------------------

/// y = W x + b with W of shape (out, in); x of any shape holding `in` values.
inline Tensor fc_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                         const std::string& layer = "fc") {
  if (weight.rank() != 2) throw DimensionError(layer + ": weights must be (out,in), got " + shape_string(weight.shape));
  const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
  if (input.size() != in_n) {
    throw DimensionError(layer + ": expected " + std::to_string(in_n) + " inputs, got " + std::to_string(input.size()));
  }
  require_shape(bias, {out_n}, layer + " bias");
  Tensor y({out_n});
  detail::VecMap(y.data.data(), out_n).noalias() =
      detail::ConstMatMap(weight.data.data(), out_n, in_n) * detail::ConstVecMap(input.data.data(), in_n) +
      detail::ConstVecMap(bias.data.data(), out_n);
  return y;
}

inline void fc_backward_accumulate(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                                   Tensor* grad_input, Tensor& grad_weight, Tensor& grad_bias,
                                   const std::string& layer = "fc") {
  const std::size_t out_n = weight.dim(0), in_n = weight.dim(1);
  if (input.size() != in_n || grad_out.size() != out_n) throw DimensionError(layer + ": gradient shape mismatch");
  require_shape(grad_weight, weight.shape, layer + " weight gradient");
  const detail::ConstVecMap g(grad_out.data.data(), out_n);
  detail::MatMap(grad_weight.data.data(), out_n, in_n).noalias() +=
      g * detail::ConstVecMap(input.data.data(), in_n).transpose();
  detail::VecMap(grad_bias.data.data(), out_n) += g;
  if (grad_input) {
    if (grad_input->size() != in_n) throw DimensionError(layer + ": input gradient size mismatch");
    detail::VecMap(grad_input->data.data(), in_n).noalias() +=
        detail::ConstMatMap(weight.data.data(), out_n, in_n).transpose() * g;
  }
}

struct FcGrads {
  Tensor input, weight, bias;
};

inline FcGrads fc_backward(const Tensor& input, const Tensor& weight, const Tensor& bias, const Tensor& grad_out,
                           const std::string& layer = "fc") {
  FcGrads g{Tensor(input.shape), Tensor(weight.shape), Tensor(bias.shape)};
  fc_backward_accumulate(input, weight, grad_out, &g.input, g.weight, g.bias, layer);
  return g;
}

}  // namespace tfq::nn
