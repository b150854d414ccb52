#pragma once

// Orthographic top-down grayscale ray caster with front-to-back compositing,
// plus the bilinear resampler that feeds the similarity metric.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "tfq/error.hpp"
#include "tfq/transfer_function.hpp"
#include "tfq/volume.hpp"

namespace tfq {

inline constexpr int kMetricSize = 64;
inline constexpr double kEarlyTermination = 0.999;

/// Row-major grayscale image with intensities in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f)
      : width_(width), height_(height), pixels_(checked_size(width, height), fill) {}
  GrayImage(int width, int height, std::vector<float> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_size(width, height)) {
      throw DimensionError("image " + std::to_string(width) + "x" + std::to_string(height) +
                           " needs " + std::to_string(checked_size(width, height)) + " pixels, got " +
                           std::to_string(pixels_.size()));
    }
    for (float p : pixels_) {
      if (!(p >= 0.0f && p <= 1.0f)) throw ValidationError("pixel outside [0,1] or non-finite");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<float>& pixels() const { return pixels_; }
  float at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int x, int y, float v) { pixels_[static_cast<std::size_t>(y) * width_ + x] = v; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w < 1 || h < 1) throw DimensionError("image dimensions must be positive");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }

  int width_ = 0, height_ = 0;
  std::vector<float> pixels_;
};

struct RenderSettings {
  int out_width = 256;
  int out_height = 256;
  float background = 0.0f;
  float opacity_scale = 1.0f;

  void validate() const {
    if (out_width < 1 || out_height < 1) throw ConfigError("render size must be at least 1x1");
    if (!(background >= 0.0f && background <= 1.0f)) throw ConfigError("background must lie in [0,1]");
    if (!(opacity_scale > 0.0f) || !std::isfinite(opacity_scale)) {
      throw ConfigError("opacity scale must be positive");
    }
  }
};

/// Per-sample optical properties: alpha from the transfer function, emission from the bin.
struct OpticalTable {
  std::array<double, kNumBins> alpha{};
  std::array<double, kNumBins> emission{};

  OpticalTable(const TransferFunction& tf, double opacity_scale) {
    for (int b = 0; b < kNumBins; ++b) {
      alpha[b] = std::clamp(opacity_scale * tf.opacity[b] / 255.0, 0.0, 1.0);
      emission[b] = b / 255.0;
    }
  }
};

/// Front-to-back composite of one voxel column, top (z = nz-1) to bottom.
inline float composite_column(const BinnedVolume& bv, const OpticalTable& table, int x, int y, double background) {
  double radiance = 0.0;
  double accum = 0.0;
  for (int z = bv.nz() - 1; z >= 0; --z) {
    const int bin = bv.at(x, y, z);
    const double a = table.alpha[bin];
    if (a == 0.0) continue;
    const double w = (1.0 - accum) * a;
    radiance += w * table.emission[bin];
    accum += w;
    if (accum >= kEarlyTermination) break;
  }
  return static_cast<float>(std::clamp(radiance + (1.0 - accum) * background, 0.0, 1.0));
}

/// Renders the volume looking down -z. Image column x covers voxel columns
/// left to right; image row 0 is the +y edge of the volume.
inline GrayImage render(const BinnedVolume& bv, const TransferFunction& tf, const RenderSettings& s = {}) {
  s.validate();
  const OpticalTable table(tf, s.opacity_scale);
  GrayImage img(s.out_width, s.out_height, s.background);
  std::vector<int> col_of(s.out_width), row_of(s.out_height);
  for (int px = 0; px < s.out_width; ++px) {
    col_of[px] = std::min(static_cast<int>((px + 0.5) * bv.nx() / s.out_width), bv.nx() - 1);
  }
  for (int py = 0; py < s.out_height; ++py) {
    const int y = std::min(static_cast<int>((py + 0.5) * bv.ny() / s.out_height), bv.ny() - 1);
    row_of[py] = bv.ny() - 1 - y;
  }
  // Nearest-voxel sampling: every pixel over the same column gets the same
  // value, so each column is composited at most once.
  std::vector<float> column(static_cast<std::size_t>(bv.nx()) * bv.ny());
  std::vector<char> done(column.size(), 0);
  const double bg = s.background;
  for (int py = 0; py < s.out_height; ++py) {
    for (int px = 0; px < s.out_width; ++px) {
      const int x = col_of[px];
      const int y = row_of[py];
      const std::size_t key = static_cast<std::size_t>(y) * bv.nx() + x;
      if (!done[key]) {
        column[key] = composite_column(bv, table, x, y, bg);
        done[key] = 1;
      }
      img.set(px, py, column[key]);
    }
  }
  return img;
}

/// Bilinear resampling with pixel-center alignment.
inline GrayImage resample(const GrayImage& in, int out_w, int out_h) {
  if (in.width() == out_w && in.height() == out_h) return in;
  GrayImage out(out_w, out_h);
  const double sx = static_cast<double>(in.width()) / out_w;
  const double sy = static_cast<double>(in.height()) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(in.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height() - 1);
    const double ty = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(in.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width() - 1);
      const double tx = fx - x0;
      const double top = in.at(x0, y0) * (1.0 - tx) + in.at(x1, y0) * tx;
      const double bottom = in.at(x0, y1) * (1.0 - tx) + in.at(x1, y1) * tx;
      out.set(ox, oy, static_cast<float>(std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0)));
    }
  }
  return out;
}

inline GrayImage resample64(const GrayImage& in) { return resample(in, kMetricSize, kMetricSize); }

}  // namespace tfq
