#pragma once

// Genetic search over coarse transfer functions: evaluate every individual
// (expand, smooth, render, resample, score), then breed the next generation
// by tournament selection, two-point crossover and mutation. The coordinator
// owns all randomness; workers only evaluate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfq/evo/operators.hpp"
#include "tfq/evo/worker_pool.hpp"
#include "tfq/metric.hpp"
#include "tfq/raycast.hpp"
#include "tfq/transfer_function.hpp"
#include "tfq/volume.hpp"

namespace tfq::evo {

struct SearchConfig {
  int generations = 20;
  int pop_size = 600;
  double p_crossover = 0.8;
  double p_mutate_individual = 0.3;
  double p_mutate_gene = 0.05;
  int tournament_size = 3;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  /// Sliding-window seeding when true, uniform random genes otherwise.
  bool seeding = true;
  std::vector<int> seed_levels{0, 1, 16, 64, 128};
  RenderSettings render;

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
    };
    prob(p_crossover, "crossover probability");
    prob(p_mutate_individual, "individual mutation probability");
    prob(p_mutate_gene, "gene mutation probability");
    if (generations < 1) throw ConfigError("generations must be at least 1");
    if (tournament_size < 1) throw ConfigError("tournament size must be at least 1");
    if (pop_size < tournament_size) throw ConfigError("population must be at least the tournament size");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    render.validate();
  }
};

struct BestRecord {
  Chromosome chromosome;
  double cost = std::numeric_limits<double>::infinity();
  int generation = -1;

  friend bool operator==(const BestRecord&, const BestRecord&) = default;
};

struct RunReport {
  /// costs[g][i]: cost of individual i in generation g.
  std::vector<std::vector<double>> generations;
  BestRecord best;
  double wall_seconds = 0.0;

  /// Lowest cost seen up to and including each generation.
  std::vector<double> best_so_far() const {
    std::vector<double> out;
    double run = std::numeric_limits<double>::infinity();
    for (const auto& gen : generations) {
      for (double c : gen) run = std::min(run, c);
      out.push_back(run);
    }
    return out;
  }

  /// (c - min) / (max - min) over the whole run; all zeros if max == min.
  std::vector<std::vector<double>> normalized() const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& gen : generations) {
      for (double c : gen) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
    }
    auto out = generations;
    for (auto& gen : out) {
      for (double& c : gen) c = hi > lo ? (c - lo) / (hi - lo) : 0.0;
    }
    return out;
  }

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

struct SearchResult {
  /// Smoothed 256-entry function of the best individual: exactly what was rendered.
  TransferFunction best_tf;
  RunReport report;
};

/// Expand, smooth, render and resample one chromosome to the metric size.
inline GrayImage render_chromosome(const BinnedVolume& bv, const Chromosome& c, const RenderSettings& s) {
  return resample64(render(bv, smooth(expand(c)), s));
}

/// Scores every individual in place; population order is preserved and the
/// result does not depend on the number of workers.
inline void evaluate_population(std::vector<Individual>& pop, const BinnedVolume& bv, const BoundMetric& cost,
                                const RenderSettings& settings, WorkerPool& pool) {
  std::vector<double> costs(pop.size());
  pool.run(pop.size(), [&](std::size_t i) {
    try {
      costs[i] = cost(render_chromosome(bv, pop[i].chromosome, settings));
    } catch (const std::exception& e) {
      throw RunError("individual " + std::to_string(i) + ": " + e.what());
    }
  });
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!std::isfinite(costs[i]) || costs[i] < 0.0) {
      throw RunError("individual " + std::to_string(i) + " produced invalid cost " + std::to_string(costs[i]));
    }
    pop[i].fitness = costs[i];
  }
}

inline void evaluate_population(std::vector<Individual>& pop, const BinnedVolume& bv, const GrayImage& target64,
                                const Metric& metric, const RenderSettings& settings, std::size_t workers) {
  if (target64.width() != kMetricSize || target64.height() != kMetricSize) {
    throw DimensionError("target must be resampled to 64x64 before evaluation");
  }
  WorkerPool pool(workers);
  evaluate_population(pop, bv, metric.bind(target64), settings, pool);
}

/// One generation of breeding: tournament selection, crossover of
/// consecutive pairs, mutation.
template <RandomSource R>
std::vector<Individual> breed(const std::vector<Individual>& pop, const SearchConfig& cfg, R& rng) {
  std::vector<Individual> next;
  next.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    next.push_back({tournament_select(pop, rng, cfg.tournament_size).chromosome, std::nullopt});
  }
  for (std::size_t i = 0; i + 1 < next.size(); i += 2) {
    auto [x, y] = two_point_crossover(next[i].chromosome, next[i + 1].chromosome, rng, cfg.p_crossover);
    next[i].chromosome = x;
    next[i + 1].chromosome = y;
  }
  for (auto& ind : next) {
    ind.chromosome = mutate(ind.chromosome, rng, cfg.p_mutate_individual, cfg.p_mutate_gene);
  }
  return next;
}

inline std::vector<Individual> initial_population(const SearchConfig& cfg, Rng& rng) {
  std::vector<Chromosome> chromosomes;
  if (cfg.seeding) {
    SeedConfig sc;
    sc.levels = cfg.seed_levels;
    sc.pop_size = cfg.pop_size;
    chromosomes = seed_population(sc, rng);
  } else {
    chromosomes = random_population(cfg.pop_size, rng);
  }
  std::vector<Individual> pop;
  pop.reserve(chromosomes.size());
  for (const auto& c : chromosomes) pop.push_back({c, std::nullopt});
  return pop;
}

/// Called after each evaluated generation with (generation, generation minimum, best so far).
using SearchProgress = std::function<void(int, double, double)>;

inline SearchResult run_search(const BinnedVolume& bv, const GrayImage& target, const Metric& metric,
                               const SearchConfig& cfg, const SearchProgress& progress = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const GrayImage target64 = resample64(target);
  const BoundMetric cost = metric.bind(target64);
  WorkerPool pool(cfg.workers);
  Rng rng(cfg.seed);

  SearchResult result;
  RunReport& report = result.report;
  std::vector<Individual> pop = initial_population(cfg, rng);
  for (int g = 0; g < cfg.generations; ++g) {
    evaluate_population(pop, bv, cost, cfg.render, pool);
    std::vector<double> costs;
    costs.reserve(pop.size());
    double gen_min = std::numeric_limits<double>::infinity();
    for (const auto& ind : pop) {
      costs.push_back(*ind.fitness);
      gen_min = std::min(gen_min, *ind.fitness);
      if (*ind.fitness < report.best.cost) report.best = {ind.chromosome, *ind.fitness, g};
    }
    report.generations.push_back(std::move(costs));
    if (progress) progress(g, gen_min, report.best.cost);
    if (g + 1 < cfg.generations) pop = breed(pop, cfg, rng);
  }
  result.best_tf = smooth(expand(report.best.chromosome));
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Report JSON ---------------------------------------------------------------

inline nlohmann::json report_to_json_value(const RunReport& r) {
  return {{"version", 1},
          {"generations", r.generations},
          {"normalized", r.normalized()},
          {"bestSoFar", r.best_so_far()},
          {"best", {{"genes", r.best.chromosome.genes}, {"cost", r.best.cost}, {"generation", r.best.generation}}},
          {"wallSeconds", r.wall_seconds}};
}

inline std::string report_to_json(const RunReport& r) { return report_to_json_value(r).dump(); }

inline RunReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw ParseError("unsupported report version");
    RunReport r;
    r.generations = j.at("generations").get<std::vector<std::vector<double>>>();
    const auto& best = j.at("best");
    r.best.chromosome = chromosome_from_json(nlohmann::json{{"version", 1}, {"genes", best.at("genes")}});
    r.best.cost = best.at("cost").get<double>();
    r.best.generation = best.at("generation").get<int>();
    r.wall_seconds = j.at("wallSeconds").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report schema: ") + e.what());
  }
}

}  // namespace tfq::evo
