#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "tfq/transfer_function.hpp"

using namespace tfq;

TEST(Expand, ConstantAndIndexing) {
  Chromosome zero{};
  EXPECT_EQ(expand(zero).opacity, (std::array<int, 256>{}));

  Chromosome first{};
  first.genes[0] = 255;
  const auto tf = expand(first);
  for (int j = 0; j < 256; ++j) EXPECT_EQ(tf.opacity[j], j < 16 ? 255 : 0) << j;

  Chromosome ramp{};
  for (int i = 0; i < 16; ++i) ramp.genes[i] = i * 17;
  EXPECT_EQ(expand(ramp).opacity[32], 34);
}

TEST(Expand, Injective) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    Chromosome a{}, b{};
    for (int i = 0; i < 16; ++i) a.genes[i] = b.genes[i] = rng.uniform_int(0, 255);
    const int k = rng.uniform_int(0, 15);
    b.genes[k] = (b.genes[k] + 1 + rng.uniform_int(0, 254)) % 256;
    EXPECT_NE(expand(a), expand(b));
  }
}

TEST(Smooth, ConstantIsFixedPoint) {
  TransferFunction tf;
  tf.opacity.fill(100);
  EXPECT_EQ(smooth(tf), tf);
  tf.opacity.fill(0);
  EXPECT_EQ(smooth(tf), tf);
}

TEST(Smooth, ImpulseResponse) {
  TransferFunction tf{};
  tf.opacity[128] = 255;
  const auto s = smooth(tf);
  EXPECT_EQ(s.opacity[127], 51);
  EXPECT_EQ(s.opacity[128], 153);
  EXPECT_EQ(s.opacity[129], 51);
  EXPECT_EQ(std::accumulate(s.opacity.begin(), s.opacity.end(), 0), 255);
}

TEST(Smooth, RoundsToNearest) {
  TransferFunction tf{};
  tf.opacity[10] = 5;  // 1.0, 3.0, 1.0
  tf.opacity[20] = 1;  // 0.2, 0.6, 0.2
  tf.opacity[40] = 3;  // 0.6, 1.8, 0.6
  tf.opacity[60] = 5;
  tf.opacity[61] = 5;  // 1.0, 4.0, 4.0, 1.0
  const auto s = smooth(tf);
  EXPECT_EQ(s.opacity[9], 1);
  EXPECT_EQ(s.opacity[10], 3);
  EXPECT_EQ(s.opacity[19], 0);
  EXPECT_EQ(s.opacity[20], 1);
  EXPECT_EQ(s.opacity[39], 1);
  EXPECT_EQ(s.opacity[40], 2);
  EXPECT_EQ(s.opacity[59], 1);
  EXPECT_EQ(s.opacity[60], 4);
  EXPECT_EQ(s.opacity[61], 4);
  EXPECT_EQ(s.opacity[62], 1);
}

TEST(Smooth, EdgesReplicate) {
  TransferFunction tf{};
  tf.opacity[0] = 100;
  tf.opacity[255] = 50;
  const auto s = smooth(tf);
  EXPECT_EQ(s.opacity[0], 80);  // 0.2*100 + 0.6*100 + 0.2*0
  EXPECT_EQ(s.opacity[1], 20);
  EXPECT_EQ(s.opacity[255], 40);
  EXPECT_EQ(s.opacity[254], 10);
}

TEST(Smooth, RealValuedKernelPreservesMass) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    TransferFunction tf;
    for (auto& v : tf.opacity) v = rng.uniform_int(0, 255);
    const auto real = smooth_real(tf);
    const double real_sum = std::accumulate(real.begin(), real.end(), 0.0);
    const int orig_sum = std::accumulate(tf.opacity.begin(), tf.opacity.end(), 0);
    // With replicated edges every entry still hands out weights summing to 1.
    EXPECT_NEAR(real_sum, orig_sum, 1e-8);
    const auto s = smooth(tf);
    const int s_sum = std::accumulate(s.opacity.begin(), s.opacity.end(), 0);
    EXPECT_LE(std::abs(s_sum - orig_sum), 256);
    for (int i = 0; i < 256; ++i) {
      EXPECT_GE(s.opacity[i], 0);
      EXPECT_LE(s.opacity[i], 255);
      EXPECT_LE(std::abs(s.opacity[i] - real[i]), 0.5 + 1e-9);
    }
  }
}

TEST(Seeding, CandidateCount) {
  SeedConfig cfg;
  EXPECT_EQ(window_candidates(cfg).size(), 680u);
  cfg.levels = {128};
  const auto c = window_candidates(cfg);
  EXPECT_EQ(c.size(), 136u);
  Chromosome all128;
  all128.genes.fill(128);
  EXPECT_EQ(window_chromosome(0, 16, 128), all128);
  EXPECT_NE(std::find(c.begin(), c.end(), all128), c.end());
}

TEST(Seeding, EmptyLevelsRejected) {
  SeedConfig cfg;
  cfg.levels = {};
  Rng rng(0);
  EXPECT_THROW(seed_population(cfg, rng), ConfigError);
  cfg.levels = {300};
  EXPECT_THROW(seed_population(cfg, rng), ConfigError);
}

TEST(Seeding, PopulationOfWindows) {
  SeedConfig cfg;
  cfg.pop_size = 600;
  Rng rng(42);
  const auto pop = seed_population(cfg, rng);
  ASSERT_EQ(pop.size(), 600u);
  const auto cands = window_candidates(cfg);
  const std::set<std::array<int, 16>> allowed = [&] {
    std::set<std::array<int, 16>> s;
    for (const auto& c : cands) s.insert(c.genes);
    return s;
  }();
  for (const auto& c : pop) {
    EXPECT_TRUE(allowed.count(c.genes));
    // at most one contiguous nonzero run
    int runs = 0;
    for (int i = 0; i < 16; ++i) {
      if (c.genes[i] != 0 && (i == 0 || c.genes[i - 1] == 0)) ++runs;
    }
    EXPECT_LE(runs, 1);
  }
  Rng again(42);
  EXPECT_EQ(seed_population(cfg, again), pop);
}

TEST(TfJson, RoundTripAndErrors) {
  TransferFunction zero{};
  const std::string text = tf_to_json(zero);
  EXPECT_EQ(tf_from_json(text), zero);

  nlohmann::json j = nlohmann::json::parse(text);
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["opacity"].size(), 256u);

  j["opacity"].erase(j["opacity"].begin());
  EXPECT_THROW(tf_from_json(j.dump()), ParseError);

  nlohmann::json big = nlohmann::json::parse(text);
  big["opacity"][7] = 256;
  EXPECT_THROW(tf_from_json(big.dump()), RangeError);
  big["opacity"][7] = -1;
  EXPECT_THROW(tf_from_json(big.dump()), RangeError);

  EXPECT_THROW(tf_from_json(std::string("{not json")), ParseError);
  EXPECT_THROW(tf_from_json(std::string("{\"version\":2,\"opacity\":[]}")), ParseError);

  Rng rng(9);
  TransferFunction r;
  for (auto& v : r.opacity) v = rng.uniform_int(0, 255);
  EXPECT_EQ(tf_from_json(tf_to_json(r)), r);
}

TEST(ChromosomeJson, RoundTrip) {
  Chromosome c{};
  for (int i = 0; i < 16; ++i) c.genes[i] = i * 16;
  const auto text = chromosome_to_json(c);
  EXPECT_EQ(nlohmann::json::parse(text)["genes"].size(), 16u);
  EXPECT_EQ(chromosome_from_json(text), c);
  auto j = nlohmann::json::parse(text);
  j["genes"].push_back(1);
  EXPECT_THROW(chromosome_from_json(j.dump()), ParseError);
}
