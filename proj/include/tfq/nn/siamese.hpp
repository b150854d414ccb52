#pragma once

// Siamese max-pooling CNN. Both branches of the twin network run through the
// single parameter set held by SiameseModel, so weight sharing is structural.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tfq/nn/layers.hpp"
#include "tfq/raycast.hpp"
#include "tfq/rng.hpp"

namespace tfq::nn {

enum class LayerKind { Conv, Relu, MaxPool, Fc };

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Fc: return "fc";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  std::size_t in = 0;   // input channels (conv) or features (fc)
  std::size_t out = 0;  // output channels (conv) or features (fc)
  std::size_t kernel = 0;
  std::size_t pad = 0;
  std::size_t stride = 1;

  static LayerSpec conv(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t pad,
                        std::size_t stride = 1) {
    return {LayerKind::Conv, std::move(name), in, out, kernel, pad, stride};
  }
  static LayerSpec fc(std::string name, std::size_t in, std::size_t out) {
    return {LayerKind::Fc, std::move(name), in, out, 0, 0, 1};
  }
  static LayerSpec relu() { return {LayerKind::Relu, "relu"}; }
  static LayerSpec maxpool(std::string name) { return {LayerKind::MaxPool, std::move(name), 0, 0, 2, 0, 2}; }

  bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Fc; }
  Shape weight_shape() const {
    return kind == LayerKind::Conv ? Shape{out, in, kernel, kernel} : Shape{out, in};
  }
  std::size_t fan_in() const { return kind == LayerKind::Conv ? in * kernel * kernel : in; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Layer list of one branch plus the contrastive margin.
struct Architecture {
  std::size_t input_size = kMetricSize;
  std::vector<LayerSpec> layers;
  double margin = 1.0;

  /// C1 5x5 1->32, M1, C2 5x5 32->128, M2, C3 3x3 128->256, M3, FC1 16384->1024, FC2 1024->1024.
  static Architecture standard() {
    Architecture a;
    a.input_size = 64;
    a.layers = {LayerSpec::conv("C1", 1, 32, 5, 2),     LayerSpec::relu(), LayerSpec::maxpool("M1"),
                LayerSpec::conv("C2", 32, 128, 5, 2),   LayerSpec::relu(), LayerSpec::maxpool("M2"),
                LayerSpec::conv("C3", 128, 256, 3, 1),  LayerSpec::relu(), LayerSpec::maxpool("M3"),
                LayerSpec::fc("FC1", 256 * 8 * 8, 1024), LayerSpec::relu(), LayerSpec::fc("FC2", 1024, 1024)};
    return a;
  }

  /// Same topology at toy width, for gradient checks and fast tests.
  static Architecture small(std::size_t input_size = 8, std::size_t c1 = 2, std::size_t c2 = 3, std::size_t c3 = 4,
                            std::size_t hidden = 6, std::size_t embedding = 4) {
    Architecture a;
    a.input_size = input_size;
    const std::size_t final_side = input_size / 8;
    a.layers = {LayerSpec::conv("C1", 1, c1, 3, 1),  LayerSpec::relu(), LayerSpec::maxpool("M1"),
                LayerSpec::conv("C2", c1, c2, 3, 1), LayerSpec::relu(), LayerSpec::maxpool("M2"),
                LayerSpec::conv("C3", c2, c3, 3, 1), LayerSpec::relu(), LayerSpec::maxpool("M3"),
                LayerSpec::fc("FC1", c3 * final_side * final_side, hidden), LayerSpec::relu(),
                LayerSpec::fc("FC2", hidden, embedding)};
    return a;
  }

  /// Output shape of every layer for a (1, input_size, input_size) input.
  /// Throws DimensionError if the chain does not compose.
  std::vector<Shape> output_shapes() const {
    if (input_size < 1) throw DimensionError("architecture input size must be positive");
    if (!(margin > 0.0)) throw DimensionError("contrastive margin must be positive");
    if (layers.empty()) throw DimensionError("architecture has no layers");
    std::vector<Shape> shapes;
    Shape cur{1, input_size, input_size};
    for (const auto& l : layers) {
      const std::string where = "layer " + l.name + " (" + kind_name(l.kind) + ")";
      switch (l.kind) {
        case LayerKind::Conv: {
          if (cur.size() != 3 || cur[0] != l.in) {
            throw DimensionError(where + ": expects " + std::to_string(l.in) + " channels, input is " +
                                 shape_string(cur));
          }
          if (l.stride < 1 || l.kernel < 1 || cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel) {
            throw DimensionError(where + ": invalid kernel geometry");
          }
          cur = {l.out, (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1, (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1};
          break;
        }
        case LayerKind::MaxPool:
          if (cur.size() != 3 || cur[1] % 2 || cur[2] % 2) {
            throw DimensionError(where + ": needs even spatial size, input is " + shape_string(cur));
          }
          cur = {cur[0], cur[1] / 2, cur[2] / 2};
          break;
        case LayerKind::Relu:
          break;
        case LayerKind::Fc:
          if (shape_size(cur) != l.in) {
            throw DimensionError(where + ": expects " + std::to_string(l.in) + " inputs, input is " +
                                 shape_string(cur));
          }
          cur = {l.out};
          break;
      }
      shapes.push_back(cur);
    }
    if (cur.size() != 1) throw DimensionError("architecture must end in a fully connected layer");
    return shapes;
  }

  std::size_t embedding_size() const { return output_shapes().back()[0]; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Shared-weight twin network: one architecture, one parameter list.
/// params holds (weight, bias) for every conv/fc layer in layer order.
struct SiameseModel {
  Architecture arch;
  std::vector<Tensor> params;
  std::vector<int> param_slot;  // per layer: index of its weight in params, or -1

  SiameseModel() = default;

  /// Zero-initialized parameters.
  explicit SiameseModel(Architecture a) : arch(std::move(a)) {
    arch.output_shapes();
    for (const auto& l : arch.layers) {
      if (l.has_params()) {
        param_slot.push_back(static_cast<int>(params.size()));
        params.emplace_back(l.weight_shape());
        params.emplace_back(Shape{l.out});
      } else {
        param_slot.push_back(-1);
      }
    }
  }

  const Tensor& weight(std::size_t layer) const { return params[param_slot[layer]]; }
  const Tensor& bias(std::size_t layer) const { return params[param_slot[layer] + 1]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
  }

  /// Zero tensors shaped like the parameters.
  std::vector<Tensor> zero_grads() const {
    std::vector<Tensor> g;
    g.reserve(params.size());
    for (const auto& p : params) g.emplace_back(p.shape);
    return g;
  }
};

/// Fan-in scaled uniform weights in +-sqrt(6/fan_in), zero biases.
inline SiameseModel make_model(const Architecture& arch, std::uint64_t seed) {
  SiameseModel m(arch);
  Rng rng(seed);
  for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
    const auto& l = m.arch.layers[i];
    if (!l.has_params()) continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
    for (double& w : m.params[m.param_slot[i]].data) w = rng.uniform(-bound, bound);
  }
  return m;
}

/// Per-layer inputs and pooling indices kept for the backward pass.
struct ForwardCache {
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::size_t>> argmax;
  Tensor output;
};

inline Tensor image_tensor(const GrayImage& img) {
  std::vector<double> data(img.pixels().begin(), img.pixels().end());
  return Tensor({1, static_cast<std::size_t>(img.height()), static_cast<std::size_t>(img.width())}, std::move(data));
}

/// Runs one branch. With a cache, records what backward() needs.
inline Tensor forward(const SiameseModel& m, const Tensor& input, ForwardCache* cache = nullptr) {
  require_shape(input, {1, m.arch.input_size, m.arch.input_size}, "network input");
  if (cache) {
    cache->inputs.clear();
    cache->argmax.assign(m.arch.layers.size(), {});
  }
  Tensor x = input;
  for (std::size_t i = 0; i < m.arch.layers.size(); ++i) {
    const auto& l = m.arch.layers[i];
    if (cache) cache->inputs.push_back(x);
    switch (l.kind) {
      case LayerKind::Conv:
        x = conv2d_forward(x, m.weight(i), m.bias(i), l.pad, l.stride, l.name);
        break;
      case LayerKind::Relu:
        x = relu_forward(std::move(x));
        break;
      case LayerKind::MaxPool: {
        auto r = maxpool2x2_forward(x, l.name);
        if (cache) cache->argmax[i] = std::move(r.argmax);
        x = std::move(r.output);
        break;
      }
      case LayerKind::Fc:
        x = fc_forward(x, m.weight(i), m.bias(i), l.name);
        break;
    }
  }
  if (cache) cache->output = x;
  return x;
}

/// Backpropagates d(loss)/d(embedding) through one branch, adding into grads.
/// Returns d(loss)/d(input).
inline Tensor backward(const SiameseModel& m, const ForwardCache& cache, const Tensor& grad_embedding,
                       std::vector<Tensor>& grads, bool need_input_grad = false) {
  if (cache.inputs.size() != m.arch.layers.size()) throw StateError("backward called without a forward cache");
  require_shape(grad_embedding, cache.output.shape, "embedding gradient");
  Tensor g = grad_embedding;
  for (std::size_t i = m.arch.layers.size(); i-- > 0;) {
    const auto& l = m.arch.layers[i];
    const Tensor& in = cache.inputs[i];
    const bool want_input = i > 0 || need_input_grad;
    switch (l.kind) {
      case LayerKind::Conv: {
        Tensor gi(in.shape);
        const int s = m.param_slot[i];
        conv2d_backward_accumulate(in, m.params[s], g, l.pad, l.stride, want_input ? &gi : nullptr, grads[s],
                                   grads[s + 1], l.name);
        g = std::move(gi);
        break;
      }
      case LayerKind::Relu:
        g = relu_backward(in, std::move(g));
        break;
      case LayerKind::MaxPool: {
        Tensor gi(in.shape);
        maxpool2x2_backward_accumulate(g, cache.argmax[i], gi);
        g = std::move(gi);
        break;
      }
      case LayerKind::Fc: {
        Tensor gi(in.shape);
        const int s = m.param_slot[i];
        fc_backward_accumulate(in, m.params[s], g, want_input ? &gi : nullptr, grads[s], grads[s + 1], l.name);
        g = std::move(gi);
        break;
      }
    }
  }
  return g;
}

inline Tensor embed(const SiameseModel& m, const GrayImage& img) {
  if (static_cast<std::size_t>(img.width()) != m.arch.input_size ||
      static_cast<std::size_t>(img.height()) != m.arch.input_size) {
    throw DimensionError("embed: image must be " + std::to_string(m.arch.input_size) + "x" +
                         std::to_string(m.arch.input_size) + ", got " + std::to_string(img.width()) + "x" +
                         std::to_string(img.height()));
  }
  return forward(m, image_tensor(img));
}

/// Euclidean distance between embeddings; symmetric bit-for-bit.
inline double embedding_distance(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw DimensionError("embedding size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline double distance(const SiameseModel& m, const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw DimensionError("distance: image sizes differ");
  return embedding_distance(embed(m, a), embed(m, b));
}

struct LossValue {
  double loss;
  double grad;  // d loss / d distance
};

/// Squared-hinge contrastive loss: d^2 for similar pairs (label 1),
/// max(0, margin - d)^2 for dissimilar pairs (label 0).
inline LossValue contrastive_loss(double d, int label, double margin) {
  if (!(d >= 0.0)) throw DomainError("contrastive loss: distance must be non-negative");
  if (!(margin > 0.0)) throw DomainError("contrastive loss: margin must be positive");
  if (label == 1) return {d * d, 2.0 * d};
  if (label != 0) throw DomainError("contrastive loss: label must be 0 or 1");
  const double gap = margin - d;
  if (gap <= 0.0) return {0.0, 0.0};
  return {gap * gap, -2.0 * gap};
}

/// Loss of one labeled pair through the shared network; adds parameter
/// gradients scaled by `weight` into grads when given.
inline double pair_loss(const SiameseModel& m, const Tensor& a, const Tensor& b, int label,
                        std::vector<Tensor>* grads = nullptr, double weight = 1.0) {
  ForwardCache ca, cb;
  const Tensor ea = forward(m, a, grads ? &ca : nullptr);
  const Tensor eb = forward(m, b, grads ? &cb : nullptr);
  const double d = embedding_distance(ea, eb);
  const LossValue lv = contrastive_loss(d, label, m.arch.margin);
  if (grads && d > 0.0) {
    Tensor ga(ea.shape), gb(eb.shape);
    const double scale = weight * lv.grad / d;
    for (std::size_t i = 0; i < ea.size(); ++i) {
      ga[i] = scale * (ea[i] - eb[i]);
      gb[i] = -ga[i];
    }
    backward(m, ca, ga, *grads);
    backward(m, cb, gb, *grads);
  }
  return lv.loss;
}

}  // namespace tfq::nn
