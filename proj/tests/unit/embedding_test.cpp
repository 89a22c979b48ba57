#include "sempa/embedding.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <gtest/gtest.h>

#include "sempa/file_cache.hpp"
#include "sempa/rng.hpp"
#include "sempa/search.hpp"

namespace sempa {
namespace {

std::unique_ptr<AdditiveProvider> orthonormal_for(const TokenizedMessage& msg, std::vector<double> weights = {}) {
  std::vector<std::string> surfaces;
  for (const auto& t : msg.tokens()) surfaces.push_back(t.surface);
  return AdditiveProvider::orthonormal(surfaces, weights);
}

TEST(Cosine, SelfSimilarityIsOne) {
  const EmbeddingVector a{{0.3, -1.2, 4.0}};
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-9);
}

TEST(Cosine, OrthogonalIsZero) {
  EXPECT_DOUBLE_EQ(cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{0, 1}}), 0.0);
}

TEST(Cosine, SixtyDegreesIsOneHalf) {
  const double t = M_PI / 3.0;
  EXPECT_NEAR(cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{std::cos(t), std::sin(t)}}), 0.5, 1e-12);
}

TEST(Cosine, IsSymmetricAndScaleInvariant) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    EmbeddingVector a, b;
    for (int d = 0; d < 8; ++d) {
      a.components.push_back(rng.uniform01() - 0.5);
      b.components.push_back(rng.uniform01() - 0.5);
    }
    EXPECT_DOUBLE_EQ(cosine(a, b), cosine(b, a));
    EmbeddingVector scaled = a;
    for (double& c : scaled.components) c *= 7.5;
    EXPECT_NEAR(cosine(scaled, b), cosine(a, b), 1e-12);
    EXPECT_LE(std::abs(cosine(a, b)), 1.0);
  }
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{1, 0, 0}}), DimensionMismatch);
  EXPECT_THROW(cosine(EmbeddingVector{{0, 0}}, EmbeddingVector{{1, 0}}), ZeroNormError);
}

TEST(HashProvider, DeterministicPerText) {
  HashProvider p(7);
  const auto a = p.embed("cat");
  EXPECT_EQ(a, p.embed("cat"));
  EXPECT_EQ(a, HashProvider(7).embed("cat"));
  EXPECT_NE(a, p.embed("dog"));
  EXPECT_NE(a, HashProvider(8).embed("cat"));
  EXPECT_EQ(a.dim(), kDefaultEmbeddingDim);
  EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  EXPECT_EQ(p.calls(), 3u);
  EXPECT_NO_THROW(p.embed(""));
}

TEST(AdditiveProvider, EmbedIsNormalizedSumOfTokenVectors) {
  const std::vector<std::string> surfaces{"cat", "basket"};
  const auto p = AdditiveProvider::orthonormal(surfaces);
  const auto v = p->embed("cat basket");
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(v.components[0], r, 1e-15);
  EXPECT_NEAR(v.components[1], r, 1e-15);
  for (std::size_t d = 2; d < v.dim(); ++d) EXPECT_EQ(v.components[d], 0.0);
}

TEST(AdditiveProvider, WeightsScaleContributions) {
  const std::vector<std::string> surfaces{"cat", "the"};
  const std::vector<double> weights{3.0, 4.0};
  const auto p = AdditiveProvider::orthonormal(surfaces, weights);
  const auto v = p->embed("cat the");
  EXPECT_NEAR(v.components[0], 0.6, 1e-15);
  EXPECT_NEAR(v.components[1], 0.8, 1e-15);
}

TEST(AdditiveProvider, GeneratedEntriesAreSeededAndInRange) {
  AdditiveProvider a(5, 32, 0.1, 10.0), b(5, 32, 0.1, 10.0), c(6, 32, 0.1, 10.0);
  for (const char* w : {"cat", "dog", "basket", "the"}) {
    const auto ea = a.entry(w);
    EXPECT_EQ(ea.direction, b.entry(w).direction);
    EXPECT_EQ(ea.weight, b.entry(w).weight);
    EXPECT_NE(ea.direction, c.entry(w).direction);
    EXPECT_GE(ea.weight, 0.1);
    EXPECT_LE(ea.weight, 10.0);
    EXPECT_NEAR(ea.direction.norm(), 1.0, 1e-12);
  }
}

TEST(AdditiveProvider, TokenPathMatchesTextPathForWordMessages) {
  AdditiveProvider p(9, 64, 0.1, 10.0);
  const auto msg = TokenizedMessage::from_words("a man riding a wave on a surfboard");
  std::vector<PositionMask> masks;
  for (PositionMask m = 1; m < 256; m += 7) masks.push_back(m);
  const auto token_path = p.embed_subsets(msg, masks);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const auto text_path = p.embed(reconstruct_text(msg, masks[i]));
    for (std::size_t d = 0; d < p.dim(); ++d) {
      EXPECT_NEAR(token_path[i].components[d], text_path.components[d], 1e-12);
    }
  }
}

TEST(AdditiveProvider, InvalidConfiguration) {
  EXPECT_THROW(AdditiveProvider(0, 0), ConfigError);
  EXPECT_THROW(AdditiveProvider(0, 8, 0.0, 1.0), ConfigError);
  EXPECT_THROW(AdditiveProvider(0, 8, 2.0, 1.0), ConfigError);
  AdditiveProvider p(0, 4);
  EXPECT_THROW(p.set_entry("x", EmbeddingVector{{1, 0}}, 1.0), DimensionMismatch);
  EXPECT_THROW(p.set_entry("x", EmbeddingVector{{1, 0, 0, 0}}, -1.0), ConfigError);
}

TEST(SubsetSimilarity, FullAndEmptyReceptions) {
  const auto msg = TokenizedMessage::from_words("w0 w1 w2 w3");
  HashProvider p(1);
  SubsetSimilarityCache cache(msg, p);
  EXPECT_NEAR(subset_similarity(cache, msg.full_mask()), 1.0, 1e-9);
  EXPECT_EQ(subset_similarity(cache, 0), 0.0);
}

// Orthonormal equal weights: g(S) = sum e_i / sqrt|S|, g(W) = sum e_i / sqrt K,
// so phi = |S| / sqrt(|S| K) = sqrt(|S| / K).
TEST(SubsetSimilarity, OrthonormalEqualWeightsClosedForm) {
  const auto msg = TokenizedMessage::from_words("w0 w1 w2 w3");
  const auto p = orthonormal_for(msg);
  SubsetSimilarityCache cache(msg, *p);
  EXPECT_NEAR(subset_similarity(cache, 0b0101), std::sqrt(2.0) / 2.0, 1e-12);
  for (PositionMask m = 1; m < 16; ++m) {
    EXPECT_NEAR(cache.similarity(m), std::sqrt(std::popcount(m) / 4.0), 1e-12) << m;
  }
}

TEST(SubsetSimilarity, StrictlyIncreasingInSurvivorCountUnderEqualWeights) {
  const auto msg = TokenizedMessage::from_words("a b c d e f g h");
  const auto p = orthonormal_for(msg);
  SubsetSimilarityCache cache(msg, *p);
  std::vector<double> by_count(9, -1.0);
  for (PositionMask m = 0; m < 256; ++m) {
    const double s = cache.similarity(m);
    const auto c = static_cast<std::size_t>(std::popcount(m));
    if (by_count[c] < 0) by_count[c] = s;
    EXPECT_NEAR(by_count[c], s, 1e-12);
  }
  for (std::size_t c = 1; c <= 8; ++c) EXPECT_GT(by_count[c], by_count[c - 1]);
}

// Uncached oracle: render, embed both texts, take the cosine.
double uncached_similarity(const TokenizedMessage& msg, const EmbeddingProvider& p, PositionMask m) {
  if (m == 0) return 0.0;
  return cosine(p.embed(reconstruct_text(msg, m)), p.embed(msg.text()));
}

TEST(SubsetSimilarity, CacheSoundnessOnRandomInstances) {
  Rng rng(42);
  for (int instance = 0; instance < 10; ++instance) {
    std::string text;
    const std::size_t K = 2 + rng.uniform_below(9);
    for (std::size_t k = 0; k < K; ++k) text += "tok" + std::to_string(rng.uniform_below(6)) + " ";
    const auto msg = TokenizedMessage::from_words(text);
    HashProvider p(rng.next(), 16);
    SubsetSimilarityCache cache(msg, p);
    for (int q = 0; q < 40; ++q) {
      const PositionMask m = rng.uniform_below(msg.full_mask() + 1);
      const double cached_first = cache.similarity(m);
      const double cached_again = cache.similarity(m);
      EXPECT_NEAR(cached_first, uncached_similarity(msg, p, m), 1e-12);
      EXPECT_EQ(cached_first, cached_again);
    }
  }
}

TEST(SubsetSimilarity, CountersNeverGrowMissesOnRepeatedGroups) {
  const auto msg = TokenizedMessage::from_words("a b c d e f g h");
  HashProvider p(2);
  SubsetSimilarityCache cache(msg, p);
  const auto g = random_pa(msg, 2, 99);
  exact_ats_value(g, ErasureModel(0.3), cache);
  const auto first = cache.counters();
  EXPECT_EQ(first.raw_requests, 16u);  // reference + 15 non-empty subsets
  EXPECT_EQ(first.cache_misses, 15u);  // full mask shares the reference
  exact_ats_value(g, ErasureModel(0.3), cache);
  const auto second = cache.counters();
  EXPECT_EQ(second.cache_misses, first.cache_misses);
  EXPECT_EQ(second.raw_requests, first.raw_requests + 15);
  EXPECT_LE(second.cache_misses, second.raw_requests);
  EXPECT_EQ(p.calls(), second.cache_misses);
}

TEST(SubsetSimilarity, ConcurrentQueriesAgree) {
  const auto msg = TokenizedMessage::from_words("a b c d e f g h i j");
  HashProvider p(4, 32);
  SubsetSimilarityCache cache(msg, p);
  std::vector<std::vector<double>> seen(4, std::vector<double>(1024));
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
      threads.emplace_back([&, t] {
        for (PositionMask m = 0; m < 1024; ++m) seen[t][m] = cache.similarity((m * (2 * t + 1)) % 1024);
      });
    }
  }
  for (PositionMask m = 0; m < 1024; ++m) {
    EXPECT_EQ(seen[0][m], cache.similarity(m));
    EXPECT_EQ(seen[1][m], cache.similarity((m * 3) % 1024));
  }
  EXPECT_LE(cache.counters().cache_misses, 1024u);
}

class FileCacheTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() / ("sempa_cache_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::filesystem::path dir_;
};

TEST_F(FileCacheTest, RoundTripsVectorsAndRenormalizes) {
  write_embedding_cache(path("c.jsonl"), "toy", {{"cat", EmbeddingVector{{3, 4}}}, {"", EmbeddingVector{{0, 2}}}});
  const auto cache = FileCacheProvider::load(path("c.jsonl"));
  EXPECT_EQ(cache->dim(), 2u);
  EXPECT_EQ(cache->model_id(), "toy");
  EXPECT_EQ(cache->entries(), 2u);
  const auto v = cache->embed("cat");
  EXPECT_NEAR(v.components[0], 0.6, 1e-15);
  EXPECT_NEAR(v.components[1], 0.8, 1e-15);
}

TEST_F(FileCacheTest, StrictMissIsProviderError) {
  write_embedding_cache(path("c.jsonl"), "toy", {{"cat", EmbeddingVector{{1, 0}}}});
  const auto cache = FileCacheProvider::load(path("c.jsonl"), true);
  EXPECT_THROW(cache->embed("dog"), ProviderError);
}

TEST_F(FileCacheTest, LenientMissUsesFallback) {
  write_embedding_cache(path("c.jsonl"), "toy", {{"cat", EmbeddingVector{{1, 0}}}});
  auto fallback = std::make_shared<HashProvider>(3, 2);
  const auto cache = FileCacheProvider::load(path("c.jsonl"), false, fallback);
  EXPECT_EQ(cache->embed("dog"), fallback->embed("dog"));
  EXPECT_THROW(FileCacheProvider::load(path("c.jsonl"), false, std::make_shared<HashProvider>(3, 5)), ConfigError);
}

TEST_F(FileCacheTest, MalformedFilesAreIoErrors) {
  EXPECT_THROW(FileCacheProvider::load(path("missing.jsonl")), IoError);
  {
    std::ofstream out(path("bad.jsonl"));
    out << "{\"dim\": 2, \"model\": \"m\", \"normalized\": true}\n{\"text\": \"a\", \"vector\": [1, 2, 3]}\n";
  }
  EXPECT_THROW(FileCacheProvider::load(path("bad.jsonl")), IoError);
  {
    std::ofstream out(path("bad2.jsonl"));
    out << "not json\n";
  }
  EXPECT_THROW(FileCacheProvider::load(path("bad2.jsonl")), IoError);
}

}  // namespace
}  // namespace sempa
