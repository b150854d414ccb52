#pragma once

#include <concepts>
#include <cstdint>
#include <random>

namespace tfq {

/// Anything that can hand out the two kinds of draws the library needs.
/// Operators are templated on this so tests can substitute scripted sources.
template <typename R>
concept RandomSource = requires(R& r, int lo, int hi) {
  { r.uniform_int(lo, hi) } -> std::convertible_to<int>;
  { r.uniform01() } -> std::convertible_to<double>;
};

/// Seeded mt19937_64 with platform-independent integer and real mappings
/// (std distributions are implementation-defined, so they are avoided).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform integer in [lo, hi], rejection sampled.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<int>(lo + static_cast<std::int64_t>(x % span));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

static_assert(RandomSource<Rng>);

/// Fisher-Yates shuffle driven by a RandomSource.
template <typename Container, RandomSource R>
void shuffle(Container& c, R& rng) {
  using std::swap;
  for (std::size_t i = c.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)));
    swap(c[i - 1], c[j]);
  }
}

}  // namespace tfq
