#include "sempa/core.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "sempa/corpus.hpp"
#include "sempa/rng.hpp"
#include "sempa/search.hpp"

namespace sempa {
namespace {

TokenizedMessage words(const std::string& text) { return TokenizedMessage::from_words(text); }

TEST(MakeGroup, IdentityPartition) {
  const auto msg = words("a b c d");
  const auto g = make_group(msg, {{0, 1}, {2, 3}}, 2);
  EXPECT_EQ(g.packet_count(), 2u);
  EXPECT_EQ(g.config(), (PartitionConfig{4, 2, 2}));
  EXPECT_EQ(g.to_string(), "{0 1|2 3}");
}

TEST(MakeGroup, DuplicatePositionIsRejected) {
  const auto msg = words("a b c d");
  EXPECT_THROW(make_group(msg, {{0, 1}, {1, 3}}, 2), PartitionError);
}

TEST(MakeGroup, IndivisibleLengthIsRejected) {
  const auto msg = words("a b c d e");
  EXPECT_THROW(make_group(msg, {{0, 1}, {2, 3}, {4}}, 2), DivisibilityError);
  EXPECT_THROW(PartitionConfig::make(5, 2), DivisibilityError);
}

TEST(MakeGroup, WrongPacketSizeMissingPositionAndRange) {
  const auto msg = words("a b c d");
  EXPECT_THROW(make_group(msg, {{0, 1, 2}, {3}}, 2), PartitionError);
  EXPECT_THROW(make_group(msg, {{0, 1}}, 2), PartitionError);
  EXPECT_THROW(make_group(msg, {{0, 1}, {2, 4}}, 2), PartitionError);
  EXPECT_THROW(make_group(msg, {{0, 0}, {2, 3}}, 2), PartitionError);
}

TEST(TokenizedMessage, RejectsGapsAndEmptySurfaces) {
  EXPECT_THROW(TokenizedMessage({}, TokenizationMode::word), PartitionError);
  EXPECT_THROW(TokenizedMessage({Token{0, "a"}, Token{2, "b"}}, TokenizationMode::word), PartitionError);
  EXPECT_THROW(TokenizedMessage({Token{0, "a"}, Token{0, "b"}}, TokenizationMode::word), PartitionError);
  EXPECT_THROW(TokenizedMessage({Token{0, ""}}, TokenizationMode::word), PartitionError);
  std::string long_text;
  for (int i = 0; i < 65; ++i) long_text += "w ";
  EXPECT_THROW(words(long_text), PartitionError);
}

TEST(TokenizedMessage, WordTokenizationSplitsOnAnyWhitespace) {
  const auto msg = words("  The cat\tthat\n hides ");
  ASSERT_EQ(msg.size(), 4u);
  EXPECT_EQ(msg[3].surface, "hides");
  EXPECT_EQ(msg.text(), "The cat that hides");
}

TEST(ReconstructText, AllPacketsGiveOriginalSentence) {
  const auto msg = words("The cat that hides inside a small basket");
  const auto g = make_group(msg, {{0, 5}, {1, 7}, {2, 4}, {3, 6}}, 2);
  EXPECT_EQ(reconstruct_text(msg, g, 0b1111), "The cat that hides inside a small basket");
}

TEST(ReconstructText, LostTokensKeepOriginalOrder) {
  const auto msg = words("The cat that hides inside a small basket");
  // Survivors {1,2,4,5,6,7}: "The" and "hides" were lost.
  const auto g = make_group(msg, {{0, 3}, {1, 7}, {2, 4}, {5, 6}}, 2);
  EXPECT_EQ(reconstruct_text(msg, g, 0b1110), "cat that inside a small basket");
}

TEST(ReconstructText, EmptyReceptionIsEmptyString) {
  const auto msg = words("a b c d");
  EXPECT_EQ(reconstruct_text(msg, 0), "");
}

TEST(ReconstructText, OrphanContinuationShowsMarker) {
  const auto msg = TokenizedMessage::from_pieces(
      {{"The", false}, {"cat", false}, {"that", false}, {"sitting", false},
       {"near", false}, {"a", false}, {"sneak", false}, {"er", true}});
  EXPECT_EQ(msg.text(), "The cat that sitting near a sneaker");
  EXPECT_EQ(reconstruct_text(msg, 0b10111111), "The cat that sitting near a #er");
  EXPECT_EQ(reconstruct_text(msg, 0b10000000), "#er");
  EXPECT_EQ(reconstruct_text(msg, 0b11010111), "The cat that near sneaker");
  EXPECT_EQ(reconstruct_text(msg, 0b01111111), "The cat that sitting near a sneak");
}

TEST(ReconstructText, ThreePieceWordUsesPairwiseRule) {
  const auto msg = TokenizedMessage::from_pieces({{"snow", false}, {"board", true}, {"er", true}});
  EXPECT_EQ(reconstruct_text(msg, 0b111), "snowboarder");
  EXPECT_EQ(reconstruct_text(msg, 0b101), "snow #er");
  EXPECT_EQ(reconstruct_text(msg, 0b110), "#boarder");
  EXPECT_EQ(reconstruct_text(msg, 0b011), "snowboard");
}

TEST(ReconstructText, WordTokensCannotBeContinuations) {
  EXPECT_THROW(TokenizedMessage({Token{0, "a", true}}, TokenizationMode::word), PartitionError);
}

// Over random partitions: the packets tile 0..K-1, and the rendered text
// depends only on the union of surviving positions.
TEST(PacketGroupProperty, RandomPartitionsTileAndRenderByUnion) {
  const auto msg = TokenizedMessage::from_pieces(
      {{"A", false}, {"snow", false}, {"board", true}, {"er", true}, {"on", false}, {"the", false},
       {"white", false}, {"slo", false}, {"pe", true}, {"x", false}, {"y", false}, {"z", false}});
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t M = std::vector<std::size_t>{1, 2, 3, 4, 6, 12}[rng.uniform_below(6)];
    const auto g = random_pa(msg, M, rng.next());
    std::vector<std::size_t> all;
    for (const auto& p : g.packets()) all.insert(all.end(), p.positions().begin(), p.positions().end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(msg.size());
    std::iota(expect.begin(), expect.end(), std::size_t{0});
    ASSERT_EQ(all, expect);

    const std::uint64_t subset = rng.uniform_below(std::uint64_t{1} << g.packet_count());
    EXPECT_EQ(reconstruct_text(msg, g, subset), reconstruct_text(msg, g.survivors(subset)));
  }
}

TEST(Corpus, WordCorpusSkipsBlankLinesAndUsesLineNumbers) {
  const auto corpus = load_corpus(SEMPA_DATA_DIR "/captions_mixed.txt", TokenizationMode::word);
  ASSERT_EQ(corpus.size(), 4u);
  EXPECT_EQ(corpus[1].id, "2");
  EXPECT_EQ(corpus[1].message.text(), "The cat that hides inside a small basket");
  EXPECT_EQ(corpus[2].message.size(), 3u);
}

TEST(Corpus, PretokenizedCorpusKeepsContinuationFlags) {
  const auto corpus = load_corpus(SEMPA_DATA_DIR "/subword_k8.jsonl", TokenizationMode::pretokenized_subword);
  ASSERT_EQ(corpus.size(), 3u);
  EXPECT_EQ(corpus[0].id, "sneaker");
  EXPECT_EQ(corpus[0].message.size(), 8u);
  EXPECT_TRUE(corpus[0].message[7].joins_previous);
  EXPECT_EQ(corpus[0].message.text(), "The cat that sitting near a sneaker");
  EXPECT_EQ(corpus[2].message.text(), "A snowboarder on the white slope");
}

TEST(Corpus, MissingFileIsIoError) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.txt", TokenizationMode::word), IoError);
}

}  // namespace
}  // namespace sempa
