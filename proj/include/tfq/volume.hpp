#pragma once

// Volume data model, .vol file ingestion and binning onto the 256
// transfer-function domain intervals.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "tfq/error.hpp"

namespace tfq {

inline constexpr int kNumBins = 256;
inline constexpr std::string_view kVolumeMagic = "TFQVOL1";

/// 3D scalar field, x-fastest then y then z. Immutable once built.
class Volume {
 public:
  Volume() = default;

  /// Validates the sample count and finiteness, then computes the data range.
  Volume(int nx, int ny, int nz, std::vector<float> samples)
      : nx_(nx), ny_(ny), nz_(nz), samples_(std::move(samples)) {
    if (nx < 1 || ny < 1 || nz < 1) {
      throw HeaderError("volume dimensions must be positive, got " + dims_string());
    }
    if (samples_.size() != voxel_count()) {
      throw FormatError("volume " + dims_string() + " expects " + std::to_string(voxel_count()) +
                        " samples, got " + std::to_string(samples_.size()));
    }
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      if (!std::isfinite(samples_[i])) {
        throw ValidationError("non-finite sample at index " + std::to_string(i));
      }
    }
    const auto [lo, hi] = std::minmax_element(samples_.begin(), samples_.end());
    vmin_ = *lo;
    vmax_ = *hi;
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  float vmin() const { return vmin_; }
  float vmax() const { return vmax_; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_) *
           static_cast<std::size_t>(nz_);
  }
  const std::vector<float>& samples() const { return samples_; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny_ + y) * nx_ + x;
  }
  float at(int x, int y, int z) const { return samples_[index(x, y, z)]; }

 private:
  std::string dims_string() const {
    return std::to_string(nx_) + "x" + std::to_string(ny_) + "x" + std::to_string(nz_);
  }

  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<float> samples_;
  float vmin_ = 0.0f, vmax_ = 0.0f;
};

/// Volume with each sample replaced by its transfer-function bin in [0,255].
class BinnedVolume {
 public:
  BinnedVolume() = default;
  BinnedVolume(int nx, int ny, int nz, std::vector<std::uint8_t> bins)
      : nx_(nx), ny_(ny), nz_(nz), bins_(std::move(bins)) {
    if (nx < 1 || ny < 1 || nz < 1 ||
        bins_.size() != static_cast<std::size_t>(nx) * ny * static_cast<std::size_t>(nz)) {
      throw DimensionError("binned volume size does not match its dimensions");
    }
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  const std::vector<std::uint8_t>& bins() const { return bins_; }
  std::uint8_t at(int x, int y, int z) const {
    return bins_[(static_cast<std::size_t>(z) * ny_ + y) * nx_ + x];
  }

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0;
  std::vector<std::uint8_t> bins_;
};

/// floor((s - vmin) / (vmax - vmin) * 256) clamped to [0,255]; 0 for a constant volume.
inline int bin_of(double sample, double vmin, double vmax) {
  if (!(vmax > vmin)) return 0;
  const double t = std::floor((sample - vmin) / (vmax - vmin) * kNumBins);
  return static_cast<int>(std::clamp(t, 0.0, static_cast<double>(kNumBins - 1)));
}

inline BinnedVolume bin_volume(const Volume& v) {
  std::vector<std::uint8_t> bins(v.voxel_count());
  const double lo = v.vmin();
  const double hi = v.vmax();
  std::transform(v.samples().begin(), v.samples().end(), bins.begin(),
                 [&](float s) { return static_cast<std::uint8_t>(bin_of(s, lo, hi)); });
  return BinnedVolume(v.nx(), v.ny(), v.nz(), std::move(bins));
}

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
  }
  return x;
}

}  // namespace detail

/// Parses a .vol image held in memory. `origin` is used in error messages.
inline Volume parse_volume(const std::string& bytes, const std::string& origin = "<memory>") {
  std::size_t pos = bytes.find('\n');
  if (pos == std::string::npos || bytes.compare(0, pos, kVolumeMagic) != 0) {
    throw HeaderError(origin + ": missing TFQVOL1 magic line");
  }
  const std::size_t dims_begin = pos + 1;
  const std::size_t dims_end = bytes.find('\n', dims_begin);
  if (dims_end == std::string::npos) {
    throw HeaderError(origin + ": missing dimension line");
  }
  const std::string dims_line = bytes.substr(dims_begin, dims_end - dims_begin);
  long long dims[3] = {0, 0, 0};
  {
    // Strictly "nx ny nz": decimal integers separated by single spaces.
    std::size_t p = 0;
    for (int axis = 0; axis < 3; ++axis) {
      if (axis > 0) {
        if (p >= dims_line.size() || dims_line[p] != ' ') {
          throw HeaderError(origin + ": malformed dimension line '" + dims_line + "'");
        }
        ++p;
      }
      const std::size_t start = p;
      while (p < dims_line.size() && dims_line[p] >= '0' && dims_line[p] <= '9') ++p;
      if (p == start || p - start > 9) {
        throw HeaderError(origin + ": malformed dimension line '" + dims_line + "'");
      }
      dims[axis] = std::stoll(dims_line.substr(start, p - start));
      if (dims[axis] < 1) {
        throw HeaderError(origin + ": dimensions must be positive");
      }
    }
    if (p != dims_line.size()) {
      throw HeaderError(origin + ": trailing characters on dimension line");
    }
  }
  const std::size_t count =
      static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  const std::size_t expected = count * sizeof(float);
  const std::size_t actual = bytes.size() - (dims_end + 1);
  if (actual != expected) {
    throw FormatError(origin + ": expected " + std::to_string(expected) +
                      " payload bytes, got " + std::to_string(actual));
  }
  std::vector<float> samples(count);
  const char* payload = bytes.data() + dims_end + 1;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, payload + i * 4, 4);
    raw = detail::to_little_endian(raw);
    samples[i] = std::bit_cast<float>(raw);
  }
  try {
    return Volume(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                  std::move(samples));
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(path.string() + ": cannot open volume file");
  }
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_volume(bytes, path.string());
}

inline std::string serialize_volume(const Volume& v) {
  std::string out;
  out.reserve(32 + v.voxel_count() * 4);
  out += kVolumeMagic;
  out += '\n';
  out += std::to_string(v.nx()) + ' ' + std::to_string(v.ny()) + ' ' + std::to_string(v.nz()) + '\n';
  for (float s : v.samples()) {
    const std::uint32_t raw = detail::to_little_endian(std::bit_cast<std::uint32_t>(s));
    char buf[4];
    std::memcpy(buf, &raw, 4);
    out.append(buf, 4);
  }
  return out;
}

inline void save_volume(const Volume& v, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError(path.string() + ": cannot open for writing");
  }
  const std::string bytes = serialize_volume(v);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError(path.string() + ": write failed");
  }
}

}  // namespace tfq
