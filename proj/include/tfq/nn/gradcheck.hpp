#pragma once

// Central finite-difference checks of every analytic gradient in the
// network. Each check reduces a layer output to a scalar with a random
// projection, so the finite differences never touch the backward code.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tfq/nn/layers.hpp"
#include "tfq/nn/siamese.hpp"

namespace tfq::nn {

struct GradcheckResult {
  std::string name;
  double rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;

/// ||analytic - numeric|| / max(||analytic||, ||numeric||), with a tiny floor
/// so an all-zero gradient compares equal to an all-zero estimate.
inline double relative_error(const Buffer& analytic, const Buffer& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
  return std::sqrt(diff) / denom;
}

/// d f / d x by central differences, perturbing x in place.
inline Buffer numeric_gradient(Buffer& x, const std::function<double()>& f,
                                            double h = kGradcheckStep) {
  Buffer g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace detail {

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline GradcheckResult compare(std::string name, const std::vector<Buffer>& analytic,
                               const std::vector<Buffer>& numeric) {
  Buffer a, n;
  for (const auto& v : analytic) a.insert(a.end(), v.begin(), v.end());
  for (const auto& v : numeric) n.insert(n.end(), v.begin(), v.end());
  GradcheckResult r{std::move(name), relative_error(a, n), a.size(), false};
  r.passed = r.rel_error < kGradcheckTolerance;
  return r;
}

}  // namespace detail

inline GradcheckResult gradcheck_conv(Rng& rng, std::size_t pad = 1, std::size_t stride = 1) {
  Tensor x = detail::random_tensor({2, 6, 6}, rng);
  Tensor w = detail::random_tensor({3, 2, 3, 3}, rng);
  Tensor b = detail::random_tensor({3}, rng);
  const Tensor probe = detail::random_tensor(conv2d_forward(x, w, b, pad, stride).shape, rng);
  const auto g = conv2d_backward(x, w, b, probe, pad, stride);
  auto f = [&] { return detail::dot(conv2d_forward(x, w, b, pad, stride), probe); };
  const auto nx = numeric_gradient(x.data, f);
  const auto nw = numeric_gradient(w.data, f);
  const auto nb = numeric_gradient(b.data, f);
  return detail::compare("conv2d pad=" + std::to_string(pad) + " stride=" + std::to_string(stride),
                         {g.input.data, g.weight.data, g.bias.data}, {nx, nw, nb});
}

inline GradcheckResult gradcheck_maxpool(Rng& rng) {
  Tensor x = detail::random_tensor({3, 8, 8}, rng);
  const auto fwd = maxpool2x2_forward(x);
  const Tensor probe = detail::random_tensor(fwd.output.shape, rng);
  const Tensor g = maxpool2x2_backward(probe, fwd.argmax, x.shape);
  auto f = [&] { return detail::dot(maxpool2x2_forward(x).output, probe); };
  return detail::compare("maxpool2x2", {g.data}, {numeric_gradient(x.data, f)});
}

inline GradcheckResult gradcheck_fc(Rng& rng) {
  Tensor x = detail::random_tensor({7}, rng);
  Tensor w = detail::random_tensor({5, 7}, rng);
  Tensor b = detail::random_tensor({5}, rng);
  const Tensor probe = detail::random_tensor({5}, rng);
  const auto g = fc_backward(x, w, b, probe);
  auto f = [&] { return detail::dot(fc_forward(x, w, b), probe); };
  const auto nx = numeric_gradient(x.data, f);
  const auto nw = numeric_gradient(w.data, f);
  const auto nb = numeric_gradient(b.data, f);
  return detail::compare("fc", {g.input.data, g.weight.data, g.bias.data}, {nx, nw, nb});
}

inline GradcheckResult gradcheck_relu(Rng& rng) {
  // Keep inputs away from the kink at zero so the finite difference is defined.
  Tensor x = detail::random_tensor({4, 4, 4}, rng);
  for (double& v : x.data) {
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
  }
  const Tensor probe = detail::random_tensor(x.shape, rng);
  const Tensor g = relu_backward(x, probe);
  auto f = [&] { return detail::dot(relu_forward(x), probe); };
  return detail::compare("relu", {g.data}, {numeric_gradient(x.data, f)});
}

inline GradcheckResult gradcheck_contrastive() {
  Buffer analytic, numeric;
  const double margin = 1.0;
  for (int label : {0, 1}) {
    for (double d : {0.1, 0.4, 0.75, 1.3, 2.0}) {
      analytic.push_back(contrastive_loss(d, label, margin).grad);
      Buffer x{d};
      numeric.push_back(numeric_gradient(x, [&] { return contrastive_loss(x[0], label, margin).loss; })[0]);
    }
  }
  GradcheckResult r{"contrastive loss", relative_error(analytic, numeric), analytic.size(), false};
  r.passed = r.rel_error < kGradcheckTolerance;
  return r;
}

/// Whole twin network on 8x8 inputs: pair loss w.r.t. every parameter.
inline GradcheckResult gradcheck_siamese(Rng& rng, int label) {
  Architecture arch = Architecture::small(8);
  arch.margin = 4.0;  // keeps the dissimilar hinge active
  SiameseModel m = make_model(arch, rng.next_u64());
  for (std::size_t i = 1; i < m.params.size(); i += 2) {
    for (double& b : m.params[i].data) b = rng.uniform(-0.1, 0.1);
  }
  const Tensor a = detail::random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  const Tensor b = detail::random_tensor({1, 8, 8}, rng, 0.0, 1.0);
  auto grads = m.zero_grads();
  pair_loss(m, a, b, label, &grads);
  std::vector<Buffer> analytic, numeric;
  for (std::size_t p = 0; p < m.params.size(); ++p) {
    analytic.push_back(grads[p].data);
    numeric.push_back(numeric_gradient(m.params[p].data, [&] { return pair_loss(m, a, b, label); }));
  }
  return detail::compare(std::string("siamese end-to-end (") + (label ? "similar" : "dissimilar") + ")", analytic,
                         numeric);
}

inline std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<GradcheckResult> out;
  out.push_back(gradcheck_conv(rng, 1, 1));
  out.push_back(gradcheck_conv(rng, 0, 2));
  out.push_back(gradcheck_maxpool(rng));
  out.push_back(gradcheck_fc(rng));
  out.push_back(gradcheck_relu(rng));
  out.push_back(gradcheck_contrastive());
  out.push_back(gradcheck_siamese(rng, 1));
  out.push_back(gradcheck_siamese(rng, 0));
  return out;
}

}  // namespace tfq::nn
