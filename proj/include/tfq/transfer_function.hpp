#pragma once

// Opacity transfer functions: the 16-gene coarse chromosome searched by the
// GA, the 256-entry list form used at render time, smoothing, JSON I/O and
// sliding-window population seeding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfq/error.hpp"
#include "tfq/rng.hpp"

namespace tfq {

inline constexpr int kNumGenes = 16;
inline constexpr int kNumOpacities = 256;
inline constexpr int kMaxOpacity = 255;

/// Coarse transfer function: one opacity per equal-width range of the data axis.
struct Chromosome {
  std::array<int, kNumGenes> genes{};

  friend bool operator==(const Chromosome&, const Chromosome&) = default;
  friend auto operator<=>(const Chromosome&, const Chromosome&) = default;

  bool valid() const {
    return std::all_of(genes.begin(), genes.end(), [](int g) { return g >= 0 && g <= kMaxOpacity; });
  }
};

/// Opacity per data bin; opacity[i] applies to bin i.
struct TransferFunction {
  std::array<int, kNumOpacities> opacity{};

  friend bool operator==(const TransferFunction&, const TransferFunction&) = default;

  bool valid() const {
    return std::all_of(opacity.begin(), opacity.end(), [](int v) { return v >= 0 && v <= kMaxOpacity; });
  }
};

inline TransferFunction expand(const Chromosome& c) {
  constexpr int width = kNumOpacities / kNumGenes;
  TransferFunction tf;
  for (int j = 0; j < kNumOpacities; ++j) tf.opacity[j] = c.genes[j / width];
  return tf;
}

/// Real-valued 0.2/0.6/0.2 smoothing with replicated edges, before rounding.
inline std::array<double, kNumOpacities> smooth_real(const TransferFunction& tf) {
  std::array<double, kNumOpacities> out{};
  for (int i = 0; i < kNumOpacities; ++i) {
    const int prev = tf.opacity[std::max(i - 1, 0)];
    const int next = tf.opacity[std::min(i + 1, kNumOpacities - 1)];
    // Integer numerator keeps the kernel exact: (2p + 6c + 2n) / 10.
    out[i] = static_cast<double>(2 * prev + 6 * tf.opacity[i] + 2 * next) / 10.0;
  }
  return out;
}

/// Smoothing kernel applied before rendering, rounded half-up to integers.
inline TransferFunction smooth(const TransferFunction& tf) {
  TransferFunction out;
  for (int i = 0; i < kNumOpacities; ++i) {
    const int prev = tf.opacity[std::max(i - 1, 0)];
    const int next = tf.opacity[std::min(i + 1, kNumOpacities - 1)];
    const int num = 2 * prev + 6 * tf.opacity[i] + 2 * next;  // ten times the smoothed value
    out.opacity[i] = std::clamp((num + 5) / 10, 0, kMaxOpacity);
  }
  return out;
}

struct SeedConfig {
  std::vector<int> levels{0, 1, 16, 64, 128};
  int n_ranges = kNumGenes;
  int pop_size = 600;

  void validate() const {
    if (levels.empty()) throw ConfigError("seed levels must not be empty");
    for (int l : levels) {
      if (l < 0 || l > kMaxOpacity) throw ConfigError("seed level " + std::to_string(l) + " outside [0,255]");
    }
    if (n_ranges != kNumGenes) {
      throw ConfigError("only " + std::to_string(kNumGenes) + " ranges are supported");
    }
    if (pop_size < 1) throw ConfigError("population size must be at least 1");
  }
};

/// Step function that is `level` on genes [start, start + width) and 0 elsewhere.
inline Chromosome window_chromosome(int start, int width, int level) {
  Chromosome c;
  for (int k = start; k < start + width; ++k) c.genes[k] = level;
  return c;
}

/// Every sliding window of every size at every level, in (start, width, level) order.
inline std::vector<Chromosome> window_candidates(const SeedConfig& cfg) {
  if (cfg.levels.empty()) throw ConfigError("seed levels must not be empty");
  const std::set<int> levels(cfg.levels.begin(), cfg.levels.end());
  std::vector<Chromosome> out;
  for (int start = 0; start < kNumGenes; ++start) {
    for (int width = 1; width <= kNumGenes - start; ++width) {
      for (int level : levels) out.push_back(window_chromosome(start, width, level));
    }
  }
  return out;
}

/// Initial population drawn uniformly, with replacement, from the window candidates.
template <RandomSource R>
std::vector<Chromosome> seed_population(const SeedConfig& cfg, R& rng) {
  cfg.validate();
  const auto candidates = window_candidates(cfg);
  std::vector<Chromosome> pop;
  pop.reserve(cfg.pop_size);
  for (int i = 0; i < cfg.pop_size; ++i) {
    pop.push_back(candidates[rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)]);
  }
  return pop;
}

/// Unseeded baseline: every gene uniform in [0,255].
template <RandomSource R>
std::vector<Chromosome> random_population(int pop_size, R& rng) {
  if (pop_size < 1) throw ConfigError("population size must be at least 1");
  std::vector<Chromosome> pop(pop_size);
  for (auto& c : pop) {
    for (auto& g : c.genes) g = rng.uniform_int(0, kMaxOpacity);
  }
  return pop;
}

// JSON ---------------------------------------------------------------------

namespace detail {

template <std::size_t N>
std::array<int, N> parse_int_list(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains("version") || !j.contains(key)) {
    throw ParseError(std::string("expected object with 'version' and '") + key + "'");
  }
  if (!j["version"].is_number_integer() || j["version"].get<int>() != 1) {
    throw ParseError("unsupported version");
  }
  const auto& list = j[key];
  if (!list.is_array()) throw ParseError(std::string("'") + key + "' must be an array");
  if (list.size() != N) {
    throw ParseError(std::string("'") + key + "' must have " + std::to_string(N) + " entries, got " +
                     std::to_string(list.size()));
  }
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!list[i].is_number_integer()) {
      throw ParseError(std::string("'") + key + "'[" + std::to_string(i) + "] is not an integer");
    }
    const auto v = list[i].get<long long>();
    if (v < 0 || v > kMaxOpacity) {
      throw RangeError(std::string("'") + key + "'[" + std::to_string(i) + "] = " + std::to_string(v) +
                       " outside [0,255]");
    }
    out[i] = static_cast<int>(v);
  }
  return out;
}

inline nlohmann::json parse_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const TransferFunction& tf) {
  return {{"version", 1}, {"opacity", tf.opacity}};
}

inline nlohmann::json to_json(const Chromosome& c) { return {{"version", 1}, {"genes", c.genes}}; }

inline std::string tf_to_json(const TransferFunction& tf) { return to_json(tf).dump(); }

inline TransferFunction tf_from_json(const nlohmann::json& j) {
  return TransferFunction{detail::parse_int_list<kNumOpacities>(j, "opacity")};
}

inline TransferFunction tf_from_json(const std::string& text) {
  return tf_from_json(detail::parse_text(text));
}

inline std::string chromosome_to_json(const Chromosome& c) { return to_json(c).dump(); }

inline Chromosome chromosome_from_json(const nlohmann::json& j) {
  return Chromosome{detail::parse_int_list<kNumGenes>(j, "genes")};
}

inline Chromosome chromosome_from_json(const std::string& text) {
  return chromosome_from_json(detail::parse_text(text));
}

}  // namespace tfq
