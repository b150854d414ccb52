#pragma once

// Selection, crossover and mutation on 16-gene chromosomes.

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "tfq/error.hpp"
#include "tfq/rng.hpp"
#include "tfq/transfer_function.hpp"

namespace tfq::evo {

struct Individual {
  Chromosome chromosome;
  std::optional<double> fitness;  // cost, lower is better

  friend bool operator==(const Individual&, const Individual&) = default;
};

/// Index of the lowest-cost individual among `k` uniform draws with
/// replacement. Ties go to the lowest population index.
template <RandomSource R>
std::size_t tournament_select_index(const std::vector<Individual>& pop, R& rng, int k = 3) {
  if (pop.empty()) throw StateError("tournament on an empty population");
  if (k < 1) throw ConfigError("tournament size must be at least 1");
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop[i].fitness) throw StateError("individual " + std::to_string(i) + " has no fitness");
  }
  std::size_t best = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pop.size()) - 1));
  for (int draw = 1; draw < k; ++draw) {
    const auto c = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pop.size()) - 1));
    if (*pop[c].fitness < *pop[best].fitness || (*pop[c].fitness == *pop[best].fitness && c < best)) best = c;
  }
  return best;
}

template <RandomSource R>
const Individual& tournament_select(const std::vector<Individual>& pop, R& rng, int k = 3) {
  return pop[tournament_select_index(pop, rng, k)];
}

/// Swaps genes [p, q) between the parents.
inline std::pair<Chromosome, Chromosome> crossover_at(const Chromosome& a, const Chromosome& b, int p, int q) {
  if (!(1 <= p && p < q && q <= kNumGenes - 1)) throw ConfigError("crossover cuts must satisfy 1 <= p < q <= 15");
  Chromosome x = a, y = b;
  for (int k = p; k < q; ++k) std::swap(x.genes[k], y.genes[k]);
  return {x, y};
}

/// With probability `p_crossover`, picks cuts 1 <= p < q <= 15 uniformly over
/// all such pairs and swaps the segment; otherwise returns copies.
template <RandomSource R>
std::pair<Chromosome, Chromosome> two_point_crossover(const Chromosome& a, const Chromosome& b, R& rng,
                                                      double p_crossover = 0.8) {
  if (!(rng.uniform01() < p_crossover)) return {a, b};
  constexpr int kMaxCut = kNumGenes - 1;
  constexpr int kPairs = kMaxCut * (kMaxCut - 1) / 2;
  int r = rng.uniform_int(0, kPairs - 1);
  int p = 1;
  while (r >= kMaxCut - p) {
    r -= kMaxCut - p;
    ++p;
  }
  return crossover_at(a, b, p, p + 1 + r);
}

/// With probability `p_individual` the chromosome is eligible; each gene of an
/// eligible chromosome is then redrawn uniformly from [0,255] with probability `p_gene`.
template <RandomSource R>
Chromosome mutate(const Chromosome& c, R& rng, double p_individual = 0.3, double p_gene = 0.05) {
  if (!(rng.uniform01() < p_individual)) return c;
  Chromosome out = c;
  for (auto& g : out.genes) {
    if (rng.uniform01() < p_gene) g = rng.uniform_int(0, kMaxOpacity);
  }
  return out;
}

}  // namespace tfq::evo
