#pragma once

// Deterministic synthetic volumes for demos and tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "tfq/rng.hpp"
#include "tfq/volume.hpp"

namespace tfq {

struct Blob {
  double cx, cy, cz;  // centre in voxel units
  double radius;      // Gaussian sigma in voxels
  double amplitude;
};

/// Sum of Gaussian blobs over a faint vertical ramp. Blobs of different
/// amplitude sit at different depths, so the value range maps onto
/// distinct structures and shallow features can occlude deep ones.
inline Volume blob_volume(int nx, int ny, int nz, std::uint64_t seed, int blobs = 10) {
  Rng rng(seed);
  std::vector<Blob> list;
  for (int i = 0; i < blobs; ++i) {
    const double amp = 0.25 + 0.75 * (i + rng.uniform01()) / blobs;
    list.push_back({rng.uniform(0.15, 0.85) * nx, rng.uniform(0.15, 0.85) * ny, rng.uniform(0.15, 0.85) * nz,
                    rng.uniform(0.06, 0.16) * std::min({nx, ny, nz}), amp});
  }
  std::vector<float> samples(static_cast<std::size_t>(nx) * ny * nz);
  std::size_t i = 0;
  for (int z = 0; z < nz; ++z) {
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x, ++i) {
        double v = 0.1 * z / std::max(nz - 1, 1);
        for (const auto& b : list) {
          const double dx = x - b.cx, dy = y - b.cy, dz = z - b.cz;
          v += b.amplitude * std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * b.radius * b.radius));
        }
        samples[i] = static_cast<float>(v);
      }
    }
  }
  return Volume(nx, ny, nz, std::move(samples));
}

}  // namespace tfq
