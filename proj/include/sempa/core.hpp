#pragma once

// Tokens, messages, packets and packet groups.
//
// A message of K tokens is split into N = K / M packets of exactly M tokens.
// Tokens are identified by their position in the original sentence, so a
// packet group is a set partition of {0, ..., K-1}. Sets of positions are
// carried around as 64-bit masks, which caps K at 64.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sempa/errors.hpp"

namespace sempa {

using PositionMask = std::uint64_t;

inline constexpr std::size_t kMaxTokens = 64;

/// Prefix shown on a continuation piece whose preceding piece was lost.
inline constexpr std::string_view kContinuationMarker = "#";

constexpr PositionMask low_bits(std::size_t count) noexcept {
  return count >= 64 ? ~PositionMask{0} : (PositionMask{1} << count) - 1;
}

enum class TokenizationMode { word, pretokenized_subword };

inline std::string_view to_string(TokenizationMode mode) {
  return mode == TokenizationMode::word ? "word" : "pretokenized_subword";
}

struct Token {
  std::size_t position = 0;
  std::string surface;
  bool joins_previous = false;  // subword continuation piece

  friend bool operator==(const Token&, const Token&) = default;
};

class TokenizedMessage {
 public:
  TokenizedMessage(std::vector<Token> tokens, TokenizationMode mode)
      : tokens_(std::move(tokens)), mode_(mode) {
    if (tokens_.empty()) throw PartitionError("message must contain at least one token");
    if (tokens_.size() > kMaxTokens) {
      throw PartitionError("message has " + std::to_string(tokens_.size()) +
                           " tokens; at most 64 are supported");
    }
    std::sort(tokens_.begin(), tokens_.end(),
              [](const Token& a, const Token& b) { return a.position < b.position; });
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].position != i) {
        throw PartitionError("token positions must be exactly 0..K-1 without gaps or duplicates");
      }
      if (tokens_[i].surface.empty()) throw PartitionError("token surface must be non-empty");
    }
    if (mode_ == TokenizationMode::word) {
      for (const auto& t : tokens_) {
        if (t.joins_previous) throw PartitionError("word tokens cannot be continuation pieces");
      }
    }
  }

  /// Whitespace word tokenization.
  static TokenizedMessage from_words(std::string_view text) {
    std::vector<Token> tokens;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) tokens.push_back(Token{tokens.size(), word, false});
    return TokenizedMessage(std::move(tokens), TokenizationMode::word);
  }

  /// Pre-tokenized subword pieces in sentence order.
  static TokenizedMessage from_pieces(
      std::span<const std::pair<std::string, bool>> pieces) {
    std::vector<Token> tokens;
    tokens.reserve(pieces.size());
    for (const auto& [surface, joins] : pieces) {
      tokens.push_back(Token{tokens.size(), surface, joins});
    }
    return TokenizedMessage(std::move(tokens), TokenizationMode::pretokenized_subword);
  }

  static TokenizedMessage from_pieces(
      std::initializer_list<std::pair<std::string, bool>> pieces) {
    return from_pieces(std::span<const std::pair<std::string, bool>>(pieces.begin(), pieces.size()));
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const Token& operator[](std::size_t position) const { return tokens_.at(position); }
  TokenizationMode mode() const noexcept { return mode_; }
  PositionMask full_mask() const noexcept { return low_bits(tokens_.size()); }

  /// Detokenized text of the complete message.
  std::string text() const;

 private:
  std::vector<Token> tokens_;
  TokenizationMode mode_;
};

struct PartitionConfig {
  std::size_t K = 0;  // tokens
  std::size_t M = 0;  // tokens per packet
  std::size_t N = 0;  // packets

  static PartitionConfig make(std::size_t tokens, std::size_t packet_length) {
    if (packet_length == 0 || tokens == 0) {
      throw DivisibilityError("K and M must be positive");
    }
    if (tokens % packet_length != 0) {
      throw DivisibilityError("K=" + std::to_string(tokens) + " is not divisible by M=" +
                              std::to_string(packet_length));
    }
    return PartitionConfig{tokens, packet_length, tokens / packet_length};
  }

  friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

class Packet {
 public:
  Packet() = default;

  explicit Packet(std::vector<std::size_t> positions) : positions_(std::move(positions)) {
    std::sort(positions_.begin(), positions_.end());
    for (auto p : positions_) {
      if (p >= kMaxTokens) throw PartitionError("token position out of range");
      mask_ |= PositionMask{1} << p;
    }
  }

  static Packet from_mask(PositionMask mask) {
    std::vector<std::size_t> positions;
    while (mask) {
      positions.push_back(static_cast<std::size_t>(std::countr_zero(mask)));
      mask &= mask - 1;
    }
    return Packet(std::move(positions));
  }

  /// Sorted member positions; may contain duplicates only if the input did.
  const std::vector<std::size_t>& positions() const noexcept { return positions_; }
  PositionMask mask() const noexcept { return mask_; }
  std::size_t size() const noexcept { return positions_.size(); }
  bool contains(std::size_t position) const noexcept {
    return position < kMaxTokens && ((mask_ >> position) & 1U);
  }

  friend bool operator==(const Packet& a, const Packet& b) { return a.positions_ == b.positions_; }

 private:
  std::vector<std::size_t> positions_;
  PositionMask mask_ = 0;
};

/// A validated partition of token positions into N packets of size M.
class PacketGroup {
 public:
  PacketGroup(std::vector<Packet> packets, PartitionConfig config)
      : packets_(std::move(packets)), config_(config) {
    validate();
  }

  const std::vector<Packet>& packets() const noexcept { return packets_; }
  const Packet& packet(std::size_t index) const { return packets_.at(index); }
  const PartitionConfig& config() const noexcept { return config_; }
  std::size_t packet_count() const noexcept { return packets_.size(); }

  /// Union of token positions carried by the packets selected in packet_subset.
  PositionMask survivors(std::uint64_t packet_subset) const noexcept {
    PositionMask out = 0;
    for (std::size_t i = 0; i < packets_.size(); ++i) {
      if ((packet_subset >> i) & 1U) out |= packets_[i].mask();
    }
    return out;
  }

  /// Packets ordered by smallest member; two groups describe the same
  /// partition iff their canonical forms are equal.
  std::vector<PositionMask> canonical() const {
    std::vector<PositionMask> masks;
    masks.reserve(packets_.size());
    for (const auto& p : packets_) masks.push_back(p.mask());
    std::sort(masks.begin(), masks.end(), [](PositionMask a, PositionMask b) {
      return std::countr_zero(a) < std::countr_zero(b);
    });
    return masks;
  }

  bool same_partition(const PacketGroup& other) const { return canonical() == other.canonical(); }

  /// "{0 1|2 3}" in packet order.
  std::string to_string() const {
    std::string out = "{";
    for (std::size_t i = 0; i < packets_.size(); ++i) {
      if (i) out += '|';
      const auto& pos = packets_[i].positions();
      for (std::size_t j = 0; j < pos.size(); ++j) {
        if (j) out += ' ';
        out += std::to_string(pos[j]);
      }
    }
    out += '}';
    return out;
  }

 private:
  void validate() const {
    if (config_.M == 0 || config_.N * config_.M != config_.K) {
      throw DivisibilityError("inconsistent partition config");
    }
    if (packets_.size() != config_.N) {
      throw PartitionError("expected " + std::to_string(config_.N) + " packets, got " +
                           std::to_string(packets_.size()));
    }
    PositionMask seen = 0;
    for (const auto& packet : packets_) {
      if (packet.size() != config_.M) {
        throw PartitionError("packet of size " + std::to_string(packet.size()) +
                             " violates packet length M=" + std::to_string(config_.M));
      }
      for (auto p : packet.positions()) {
        if (p >= config_.K) throw PartitionError("position " + std::to_string(p) + " out of range");
        const PositionMask bit = PositionMask{1} << p;
        if (seen & bit) throw PartitionError("position " + std::to_string(p) + " appears twice");
        seen |= bit;
      }
    }
    if (seen != low_bits(config_.K)) throw PartitionError("packets do not cover every position");
  }

  std::vector<Packet> packets_;
  PartitionConfig config_;
};

inline PacketGroup make_group(std::size_t token_count,
                              std::span<const std::vector<std::size_t>> assignment,
                              std::size_t packet_length) {
  const auto config = PartitionConfig::make(token_count, packet_length);
  std::vector<Packet> packets;
  packets.reserve(assignment.size());
  for (const auto& set : assignment) packets.emplace_back(set);
  return PacketGroup(std::move(packets), config);
}

inline PacketGroup make_group(const TokenizedMessage& msg,
                              std::span<const std::vector<std::size_t>> assignment,
                              std::size_t packet_length) {
  return make_group(msg.size(), assignment, packet_length);
}

inline PacketGroup make_group(const TokenizedMessage& msg,
                              std::initializer_list<std::vector<std::size_t>> assignment,
                              std::size_t packet_length) {
  return make_group(msg.size(),
                    std::span<const std::vector<std::size_t>>(assignment.begin(), assignment.size()),
                    packet_length);
}

/// Renders the surviving tokens in original order.
///
/// Word tokens are joined by single spaces. A continuation piece is glued to
/// its predecessor only when the token at the immediately preceding position
/// also survived; otherwise it is emitted as a separate word carrying
/// kContinuationMarker. The rule is applied pairwise, so in a three-piece word
/// whose middle piece is lost the last piece is shown as an orphan.
inline std::string reconstruct_text(const TokenizedMessage& msg, PositionMask survivors) {
  std::string out;
  const auto& tokens = msg.tokens();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!((survivors >> i) & 1U)) continue;
    const Token& t = tokens[i];
    const bool previous_survived = i > 0 && ((survivors >> (i - 1)) & 1U);
    if (t.joins_previous && previous_survived) {
      out += t.surface;
      continue;
    }
    if (!out.empty()) out += ' ';
    if (t.joins_previous) out += kContinuationMarker;
    out += t.surface;
  }
  return out;
}

inline std::string reconstruct_text(const TokenizedMessage& msg, const PacketGroup& group,
                                    std::uint64_t packet_subset) {
  return reconstruct_text(msg, group.survivors(packet_subset));
}

inline std::string TokenizedMessage::text() const { return reconstruct_text(*this, full_mask()); }

}  // namespace sempa
