// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "studio_fixture.hpp"
#include "tfq/tfq.hpp"

using namespace tfq;
using tfq::testing::TempDir;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

GrayImage noise_image(Rng& rng, int side) {
  std::vector<float> px(static_cast<std::size_t>(side) * side);
  for (auto& p : px) p = static_cast<float>(rng.uniform01());
  return GrayImage(side, side, px);
}

// Oracle task shared by criteria 4 and 5: a 64^3 synthetic volume and a
// target rendered from a planted chromosome.
struct OracleTask {
  BinnedVolume volume = bin_volume(blob_volume(64, 64, 64, 1));
  Chromosome planted = [] {
    Chromosome c{};
    c.genes = {0, 0, 0, 0, 12, 12, 30, 30, 30, 8, 0, 0, 0, 0, 0, 0};
    return c;
  }();
  GrayImage target = render(volume, smooth(expand(planted)), RenderSettings{});

  evo::SearchResult run(std::uint64_t seed, bool seeding, int generations) const {
    evo::SearchConfig cfg;
    cfg.pop_size = 64;
    cfg.generations = generations;
    cfg.seed = seed;
    cfg.seeding = seeding;
    return evo::run_search(volume, target, MseMetric(), cfg);
  }
};

const OracleTask& oracle() {
  static const OracleTask task;
  return task;
}

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  bool all = true;
  for (const auto& r : nn::run_gradcheck_suite(7)) {
    all = all && r.passed && r.rel_error < 1e-4;
    if (r.rel_error >= worst) {
      worst = r.rel_error;
      worst_name = r.name;
    }
  }
  const double t = seconds_since(t0);
  return {all && t < 60.0, fmt("worst rel error %.2e (%s), %.1fs", worst, worst_name.c_str(), t)};
}

Outcome architecture_trace() {
  const nn::SiameseModel m = nn::make_model(nn::Architecture::standard(), 1);
  Rng rng(2);
  nn::ForwardCache cache;
  const nn::Tensor e = nn::forward(m, nn::image_tensor(noise_image(rng, 64)), &cache);
  const std::vector<nn::Shape> expected{{32, 64, 64},   {32, 64, 64},  {32, 32, 32}, {128, 32, 32},
                                        {128, 32, 32},  {128, 16, 16}, {256, 16, 16}, {256, 16, 16},
                                        {256, 8, 8},    {1024},        {1024},        {1024}};
  std::vector<nn::Shape> got;
  for (std::size_t i = 1; i < cache.inputs.size(); ++i) got.push_back(cache.inputs[i].shape);
  got.push_back(e.shape);
  std::string trace;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (i == 0 || got[i] != got[i - 1]) trace += (trace.empty() ? "" : "->") + nn::shape_string(got[i]);
  }
  return {got == expected && nn::shape_size(cache.inputs[9].shape) == 16384, trace};
}

Outcome metric_symmetry() {
  const nn::SiameseModel m = nn::make_model(nn::Architecture::standard(), 3);
  Rng rng(4);
  int asym = 0, nonzero_self = 0;
  for (int i = 0; i < 100; ++i) {
    const GrayImage a = noise_image(rng, 64), b = noise_image(rng, 64);
    asym += nn::distance(m, a, b) != nn::distance(m, b, a);
    nonzero_self += nn::distance(m, a, a) != 0.0;
  }
  return {asym == 0 && nonzero_self == 0, fmt("100 pairs: %d asymmetric, %d nonzero self-distances", asym, nonzero_self)};
}

Outcome oracle_recovery() {
  const auto t0 = Clock::now();
  const auto r = oracle().run(100, true, 20);
  const double t = seconds_since(t0);
  const double med0 = median(r.report.generations[0]);
  const double ratio = r.report.best.cost / med0;
  return {ratio < 0.10 && t < 300.0,
          fmt("best %.3g / gen-0 median %.3g = %.1f%%, %.1fs", r.report.best.cost, med0, 100 * ratio, t)};
}

Outcome seeding_benefit() {
  // Ten generations are enough: breeding stops after the last evaluated
  // generation, so the first 11 generations match a 20-generation run exactly.
  std::vector<double> seeded, random;
  for (int run = 0; run < 10; ++run) {
    seeded.push_back(oracle().run(100 + run, true, 11).report.best_so_far()[10]);
    random.push_back(oracle().run(100 + run, false, 11).report.best_so_far()[10]);
  }
  const double ms = median(seeded), mr = median(random);
  return {ms < mr, fmt("median best at gen 10: seeded %.3g, random %.3g", ms, mr)};
}

Outcome operator_statistics() {
  Rng rng(2024);
  std::vector<evo::Individual> trio;
  for (double c : {1.0, 2.0, 3.0}) trio.push_back({Chromosome{}, c});
  int wins = 0;
  for (int i = 0; i < 10000; ++i) wins += evo::tournament_select_index(trio, rng) == 0;
  const double win_rate = wins / 10000.0;

  Chromosome base;
  for (auto& g : base.genes) g = rng.uniform_int(0, 255);
  long changed = 0;
  for (int i = 0; i < 10000; ++i) {
    const Chromosome m = evo::mutate(base, rng, 1.0, 0.05);
    for (int k = 0; k < 16; ++k) changed += m.genes[k] != base.genes[k];
  }
  const double mean_changed = changed / 10000.0;

  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    Chromosome a, b;
    for (int k = 0; k < 16; ++k) {
      a.genes[k] = rng.uniform_int(0, 255);
      b.genes[k] = rng.uniform_int(0, 255);
    }
    const auto [x, y] = evo::two_point_crossover(a, b, rng);
    std::vector<int> before(a.genes.begin(), a.genes.end()), after(x.genes.begin(), x.genes.end());
    before.insert(before.end(), b.genes.begin(), b.genes.end());
    after.insert(after.end(), y.genes.begin(), y.genes.end());
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    violations += before != after;
  }
  const double expected_changed = 16 * 0.05 * 255.0 / 256.0;
  const bool ok = std::abs(win_rate - 19.0 / 27.0) <= 0.02 && std::abs(mean_changed - expected_changed) <= 0.05 &&
                  violations == 0;
  return {ok, fmt("tournament %.4f (want %.4f), mutated genes %.4f (want %.4f), crossover violations %d", win_rate,
                  19.0 / 27.0, mean_changed, expected_changed, violations)};
}

Outcome renderer_oracle() {
  Rng rng(99);
  double worst = 0.0;
  RenderSettings one;
  one.out_width = one.out_height = 1;
  for (int trial = 0; trial < 1000; ++trial) {
    const int nz = rng.uniform_int(1, 8);
    std::vector<std::uint8_t> bins(nz);
    for (auto& b : bins) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    TransferFunction tf;
    for (auto& o : tf.opacity) o = rng.uniform_int(0, 255);
    one.background = static_cast<float>(rng.uniform01());
    // Brute force over the closed form, top (z = nz-1) first.
    double value = 0.0, transmit = 1.0;
    for (int z = nz - 1; z >= 0; --z) {
      const double a = tf.opacity[bins[z]] / 255.0;
      value += transmit * a * (bins[z] / 255.0);
      transmit *= 1.0 - a;
      if (1.0 - transmit >= 0.999) break;
    }
    value += transmit * one.background;
    const float got = render(BinnedVolume(1, 1, nz, bins), tf, one).at(0, 0);
    worst = std::max(worst, std::abs(got - value));
  }

  const BinnedVolume vol = bin_volume(blob_volume(32, 32, 32, 5));
  RenderSettings bg;
  bg.background = 0.3f;
  const bool zero_ok = render(vol, TransferFunction{}, bg) == GrayImage(256, 256, 0.3f);

  TransferFunction tf{};
  tf.opacity[128] = 128;
  tf.opacity[255] = 255;
  const auto px = [&](std::vector<std::uint8_t> bottom_up) {
    return render(BinnedVolume(1, 1, static_cast<int>(bottom_up.size()), bottom_up), tf, one).at(0, 0);
  };
  one.background = 0.0f;
  const double behind = px({255, 128, 128}) - px({128, 128});
  const double alone = px({255});
  const double share = behind / alone;
  return {worst <= 1e-6 && zero_ok && share < 0.25,
          fmt("max |render - brute force| %.2e, zero TF background %s, third voxel keeps %.1f%%", worst,
              zero_ok ? "exact" : "WRONG", 100 * share)};
}

Outcome smoothing_kernel() {
  TransferFunction impulse{};
  impulse.opacity[128] = 255;
  const auto s = smooth(impulse);
  const bool impulse_ok = s.opacity[127] == 51 && s.opacity[128] == 153 && s.opacity[129] == 51 &&
                          std::count(s.opacity.begin(), s.opacity.end(), 0) == 253;
  int bad_constants = 0;
  for (int v = 0; v <= 255; ++v) {
    TransferFunction c;
    c.opacity.fill(v);
    bad_constants += smooth(c) != c;
  }
  return {impulse_ok && bad_constants == 0,
          fmt("impulse -> (%d,%d,%d), %d of 256 constants changed", s.opacity[127], s.opacity[128], s.opacity[129],
              bad_constants)};
}

Outcome determinism() {
  TempDir dir;
  const auto q = [](const std::filesystem::path& p) { return "'" + p.string() + "'"; };
  const std::string cli = q(tfq::testing::cli_path());
  auto ok = [&](const std::string& args) { return tfq::testing::run_command(cli + " " + args).exit_code == 0; };
  Chromosome c{};
  c.genes = {0, 0, 0, 0, 12, 12, 30, 30, 30, 8, 0, 0, 0, 0, 0, 0};
  tfq::testing::write_file(dir / "planted.json", tf_to_json(smooth(expand(c))));
  if (!ok("make-volume --size 32 --seed 1 --out " + q(dir / "v.vol")) ||
      !ok("render --volume " + q(dir / "v.vol") + " --tf " + q(dir / "planted.json") + " --out " +
          q(dir / "target.png"))) {
    return {false, "could not prepare inputs"};
  }
  std::map<int, std::pair<std::string, nlohmann::json>> out;
  for (int workers : {1, 8}) {
    const std::string w = std::to_string(workers);
    if (!ok("search --volume " + q(dir / "v.vol") + " --target " + q(dir / "target.png") +
            " --metric mse --pop 48 --gens 6 --size 128 --seed 7 --workers " + w + " --out " +
            q(dir / ("tf" + w + ".json")) + " --report " + q(dir / ("report" + w + ".json")))) {
      return {false, "search with " + w + " workers failed"};
    }
    auto report = nlohmann::json::parse(tfq::testing::read_file(dir / ("report" + w + ".json")));
    report.erase("wallSeconds");
    out[workers] = {tfq::testing::read_file(dir / ("tf" + w + ".json")), report};
  }
  const bool tf_same = out[1].first == out[8].first;
  const bool report_same = out[1].second.dump() == out[8].second.dump();
  return {tf_same && report_same, fmt("TF JSON %s, report (less wall time) %s", tf_same ? "identical" : "DIFFERS",
                                      report_same ? "identical" : "DIFFERS")};
}

Outcome training_sanity() {
  TempDir dir;
  Rng rng(11);
  for (int i = 0; i < 5; ++i) {
    for (auto [prefix, level] : {std::pair{"white", 0.8}, std::pair{"black", 0.1}}) {
      GrayImage g(64, 64);
      for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) g.set(x, y, static_cast<float>(std::clamp(level + rng.uniform(-0.1, 0.1), 0.0, 1.0)));
      save_image(g, dir / (std::string(prefix) + std::to_string(i) + ".png"));
    }
  }
  nn::PairSet pairs;
  for (int i = 0; i < 5; ++i) {
    const std::string n = std::to_string(i), m = std::to_string((i + 1) % 5), k = std::to_string((i + 2) % 5);
    pairs.push_back({"white" + n + ".png", "white" + m + ".png", 1});
    pairs.push_back({"black" + n + ".png", "black" + k + ".png", 1});
    pairs.push_back({"white" + n + ".png", "black" + m + ".png", 0});
    pairs.push_back({"black" + n + ".png", "white" + k + ".png", 0});
  }
  const auto t0 = Clock::now();
  nn::TrainOptions opt;
  opt.seed = 5;
  const auto r = nn::train_metric(dir.path(), pairs, opt);
  const double t = seconds_since(t0);
  double sim = 0, dis = 0;
  for (const auto& p : pairs) {
    const double d = nn::distance(r.model, load_image(dir / p.a), load_image(dir / p.b));
    (p.label ? sim : dis) += d / 10.0;
  }
  const bool ok = r.epoch_loss.size() == 100 && sim < dis && r.epoch_loss[19] < r.epoch_loss[0] && t < 600.0;
  return {ok, fmt("similar %.3g < dissimilar %.3g; loss epoch 1 %.3g, epoch 20 %.3g; %.0fs", sim, dis,
                  r.epoch_loss[0], r.epoch_loss[19], t)};
}

Outcome pair_bookkeeping() {
  TempDir dir;
  std::filesystem::create_directories(dir / "corpus");
  tfq::testing::write_corpus(dir / "corpus", 89);
  tfq::testing::LiveStudio live(dir / "corpus", dir / "pairs.jsonl", 8);
  auto& client = live.client();
  int accepted = 0;
  for (int i = 0; i < 171; ++i) {
    auto session = client.Get("/api/session");
    if (!session || session->status != 200) return {false, "session request failed"};
    const auto s = nlohmann::json::parse(session->body);
    const nlohmann::json body{{"referenceId", s["reference"]["id"]},
                              {"similarId", s["grid"][0]["id"]},
                              {"dissimilarId", s["grid"][1]["id"]},
                              {"timestamp", "2024-01-01T00:00:00Z"}};
    auto post = client.Post("/api/pairs", body.dump(), "application/json");
    accepted += post && post->status == 201;
  }
  auto submit = client.Post("/api/submit", "", "application/json");
  if (!submit || submit->status != 200) return {false, "submit failed"};
  const int reported = nlohmann::json::parse(submit->body)["pairs"].get<int>();
  const std::size_t lines = nn::load_pairs(dir / "pairs.jsonl").size();
  return {accepted == 171 && reported == 342 && lines == 342,
          fmt("%d annotations accepted, submit reports %d pairs, file holds %zu", accepted, reported, lines)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"architecture trace", architecture_trace},
      {"metric symmetry and identity", metric_symmetry},
      {"oracle recovery", oracle_recovery},
      {"seeding benefit", seeding_benefit},
      {"operator statistics", operator_statistics},
      {"renderer oracle", renderer_oracle},
      {"smoothing kernel", smoothing_kernel},
      {"determinism across worker counts", determinism},
      {"training sanity", training_sanity},
      {"pair bookkeeping", pair_bookkeeping},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
