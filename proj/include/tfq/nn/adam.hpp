#pragma once

#include <cmath>
#include <vector>

#include "tfq/nn/tensor.hpp"

namespace tfq::nn {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update. Moments are created on the first call.
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& s) {
  if (grads.size() != params.size()) throw DimensionError("adam: parameter/gradient count mismatch");
  if (s.m.empty() && s.v.empty()) {
    for (const auto& p : params) {
      s.m.emplace_back(p.shape);
      s.v.emplace_back(p.shape);
    }
  }
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw DimensionError("adam: state does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(grads[i], params[i].shape, "adam gradient " + std::to_string(i));
    require_shape(s.m[i], params[i].shape, "adam first moment " + std::to_string(i));
    require_shape(s.v[i], params[i].shape, "adam second moment " + std::to_string(i));
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    auto& m = s.m[i].data;
    auto& v = s.v[i].data;
    const auto& g = grads[i].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = s.beta1 * m[k] + (1.0 - s.beta1) * g[k];
      v[k] = s.beta2 * v[k] + (1.0 - s.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

}  // namespace tfq::nn
