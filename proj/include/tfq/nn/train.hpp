#pragma once

// Contrastive training of the Siamese metric from labeled image pairs.

#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfq/image_io.hpp"
#include "tfq/nn/adam.hpp"
#include "tfq/nn/siamese.hpp"

namespace tfq::nn {

struct LabeledPair {
  std::string a;
  std::string b;
  int label = 0;  // 1 similar, 0 dissimilar

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

using PairSet = std::vector<LabeledPair>;

inline LabeledPair parse_pair_line(const std::string& line, std::size_t line_no = 0) {
  const std::string where = "pairs line " + std::to_string(line_no);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("a") || !j.contains("b") || !j.contains("label") || !j["a"].is_string() ||
      !j["b"].is_string() || !j["label"].is_number_integer()) {
    throw ParseError(where + ": expected {\"a\":str,\"b\":str,\"label\":0|1}");
  }
  const int label = j["label"].get<int>();
  if (label != 0 && label != 1) throw RangeError(where + ": label must be 0 or 1");
  return {j["a"].get<std::string>(), j["b"].get<std::string>(), label};
}

inline std::string pair_to_line(const LabeledPair& p) {
  return nlohmann::json{{"a", p.a}, {"b", p.b}, {"label", p.label}}.dump();
}

/// Reads a JSON-lines pair file. Blank lines are ignored.
inline PairSet load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open pair file");
  PairSet pairs;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    pairs.push_back(parse_pair_line(line, n));
  }
  return pairs;
}

struct TrainOptions {
  int epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  Architecture arch = Architecture::standard();
  /// Called after each epoch with (epoch index, mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainResult {
  SiameseModel model;
  std::vector<double> epoch_loss;
};

/// Trains on pre-loaded images. Each pair indexes into `images`.
/// Within a batch, each distinct image is forwarded and backpropagated once
/// with its embedding gradients summed over the pairs that use it.
inline TrainResult train_on_images(const std::vector<Tensor>& images,
                                   const std::vector<std::array<std::size_t, 2>>& pair_index,
                                   const std::vector<int>& labels, const TrainOptions& opt) {
  if (pair_index.empty()) throw ConfigError("training needs at least one pair");
  if (pair_index.size() != labels.size()) throw ConfigError("pair/label count mismatch");
  if (opt.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (opt.batch_size < 1) throw ConfigError("batch size must be at least 1");
  for (const auto& pi : pair_index) {
    if (pi[0] >= images.size() || pi[1] >= images.size()) throw ConfigError("pair references missing image");
  }

  Rng rng(opt.seed);
  TrainResult result{make_model(opt.arch, rng.next_u64()), {}};
  SiameseModel& model = result.model;
  AdamState adam;
  adam.lr = opt.learning_rate;

  std::vector<std::size_t> order(pair_index.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += opt.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opt.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);

      // Distinct images of this batch, in first-use order.
      std::map<std::size_t, std::size_t> local;
      std::vector<std::size_t> used;
      for (std::size_t k = begin; k < end; ++k) {
        for (std::size_t side : pair_index[order[k]]) {
          if (local.emplace(side, used.size()).second) used.push_back(side);
        }
      }
      std::vector<ForwardCache> caches(used.size());
      std::vector<Tensor> emb(used.size());
      for (std::size_t u = 0; u < used.size(); ++u) emb[u] = forward(model, images[used[u]], &caches[u]);

      std::vector<Tensor> grad_emb;
      grad_emb.reserve(used.size());
      for (const auto& e : emb) grad_emb.emplace_back(e.shape);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& pi = pair_index[order[k]];
        const std::size_t ua = local[pi[0]], ub = local[pi[1]];
        const double d = embedding_distance(emb[ua], emb[ub]);
        const LossValue lv = contrastive_loss(d, labels[order[k]], model.arch.margin);
        epoch_sum += lv.loss;
        if (d > 0.0 && lv.grad != 0.0) {
          const double scale = inv_batch * lv.grad / d;
          for (std::size_t i = 0; i < emb[ua].size(); ++i) {
            const double g = scale * (emb[ua][i] - emb[ub][i]);
            grad_emb[ua][i] += g;
            grad_emb[ub][i] -= g;
          }
        }
      }

      auto grads = model.zero_grads();
      for (std::size_t u = 0; u < used.size(); ++u) backward(model, caches[u], grad_emb[u], grads);
      caches.clear();
      adam_step(model.params, grads, adam);
    }
    const double mean = epoch_sum / static_cast<double>(order.size());
    result.epoch_loss.push_back(mean);
    if (opt.on_epoch) opt.on_epoch(epoch, mean);
  }
  return result;
}

/// Loads every referenced image (resampled to the network input size) before
/// training starts, so an unresolvable path fails fast.
inline TrainResult train_metric(const std::filesystem::path& image_dir, const PairSet& pairs,
                                const TrainOptions& opt) {
  if (pairs.empty()) throw ConfigError("pair set is empty");
  if (opt.epochs < 1) throw ConfigError("epochs must be at least 1");
  std::map<std::string, std::size_t> slot;
  std::vector<Tensor> images;
  std::vector<std::array<std::size_t, 2>> index;
  std::vector<int> labels;
  const auto side = static_cast<int>(opt.arch.input_size);
  auto resolve = [&](const std::string& rel) {
    auto it = slot.find(rel);
    if (it != slot.end()) return it->second;
    const auto path = image_dir / rel;
    if (!std::filesystem::is_regular_file(path)) throw IoError(path.string() + ": image not found");
    images.push_back(image_tensor(resample(load_image(path), side, side)));
    slot.emplace(rel, images.size() - 1);
    return images.size() - 1;
  };
  for (const auto& p : pairs) {
    index.push_back({resolve(p.a), resolve(p.b)});
    labels.push_back(p.label);
  }
  return train_on_images(images, index, labels, opt);
}

}  // namespace tfq::nn
