#pragma once

// Image-to-target cost functions used by the search. Lower is better.

#include <functional>
#include <memory>
#include <string>

#include "tfq/nn/siamese.hpp"
#include "tfq/raycast.hpp"

namespace tfq {

/// Cost of a render against a fixed target, both already at the metric size.
using BoundMetric = std::function<double(const GrayImage&)>;

class Metric {
 public:
  virtual ~Metric() = default;

  virtual std::string name() const = 0;
  virtual double evaluate(const GrayImage& render, const GrayImage& target) const = 0;

  /// Fixes the target so repeated evaluations can reuse target-side work.
  /// The returned callable must give the same value as evaluate(), and be
  /// safe to call from several threads at once.
  virtual BoundMetric bind(const GrayImage& target) const {
    return [this, target](const GrayImage& render) { return evaluate(render, target); };
  }
};

namespace detail {

inline void require_same_size(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError("metric: image sizes differ (" + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
  }
}

}  // namespace detail

/// Mean squared pixel difference; the oracle metric.
class MseMetric final : public Metric {
 public:
  std::string name() const override { return "mse"; }

  double evaluate(const GrayImage& render, const GrayImage& target) const override {
    detail::require_same_size(render, target);
    double sum = 0.0;
    const auto& a = render.pixels();
    const auto& b = target.pixels();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = static_cast<double>(a[i]) - b[i];
      sum += d * d;
    }
    return sum / static_cast<double>(a.size());
  }
};

/// L2 distance between Siamese embeddings.
class SiameseMetric final : public Metric {
 public:
  explicit SiameseMetric(std::shared_ptr<const nn::SiameseModel> model) : model_(std::move(model)) {}

  std::string name() const override { return "siamese"; }
  const nn::SiameseModel& model() const { return *model_; }

  double evaluate(const GrayImage& render, const GrayImage& target) const override {
    detail::require_same_size(render, target);
    return nn::distance(*model_, render, target);
  }

  BoundMetric bind(const GrayImage& target) const override {
    auto target_embedding = std::make_shared<const nn::Tensor>(nn::embed(*model_, target));
    return [model = model_, target_embedding, w = target.width(), h = target.height()](const GrayImage& render) {
      if (render.width() != w || render.height() != h) throw DimensionError("metric: image sizes differ");
      return nn::embedding_distance(nn::embed(*model, render), *target_embedding);
    };
  }

 private:
  std::shared_ptr<const nn::SiameseModel> model_;
};

}  // namespace tfq
