// Recover a planted transfer function from its own rendering using the
// pixel-MSE metric: the smallest end-to-end use of the library.

#include <iostream>

#include "tfq/tfq.hpp"

int main() {
  const auto volume = tfq::bin_volume(tfq::blob_volume(48, 48, 48, 1));

  tfq::Chromosome planted;
  for (int k = 6; k < 11; ++k) planted.genes[k] = 24;
  const auto target = tfq::render(volume, tfq::smooth(tfq::expand(planted)));

  tfq::evo::SearchConfig cfg;
  cfg.pop_size = 48;
  cfg.generations = 10;
  cfg.seed = 3;
  cfg.render.out_width = cfg.render.out_height = 64;

  const tfq::MseMetric mse;
  const auto result = tfq::evo::run_search(volume, target, mse, cfg, [](int g, double gen_min, double best) {
    std::cout << "generation " << g << "  min " << gen_min << "  best " << best << "\n";
  });
  std::cout << "best genes:";
  for (int g : result.report.best.chromosome.genes) std::cout << ' ' << g;
  std::cout << "\n";
}
