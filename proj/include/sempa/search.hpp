#pragma once

// Optimizers for the packet grouping problem
//
//   maximize ATS(G)  over partitions G of the K token positions into N packets of M tokens.
//
// full_search      exhaustive, over K! / ((M!)^N N!) partitions
// random_pa        one uniformly random partition
// gbeam_search     genetic beam search: a population of L groups, the best B
//                  are kept as beams, each beam spawns L/B children by swapping
//                  one token between two packets, repeated for G generations.
//
// All optimizers evaluate candidates through one SubsetSimilarityCache, so
// counters report both the nominal request count and the distinct encodings.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "sempa/ats.hpp"
#include "sempa/core.hpp"
#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"
#include "sempa/rng.hpp"

namespace sempa {

inline constexpr std::uint64_t kDefaultMaxPartitions = 1'000'000;

// ---------------------------------------------------------------------------
// Partition enumeration
// ---------------------------------------------------------------------------

/// C(n, k), saturating at UINT64_MAX.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

/// Number of unordered partitions of K items into blocks of M, i.e.
/// K! / ((M!)^N N!), computed as prod_j C(K - jM - 1, M - 1). Saturates at
/// UINT64_MAX.
inline std::uint64_t partition_count(std::size_t tokens, std::size_t packet_length) {
  const auto cfg = PartitionConfig::make(tokens, packet_length);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 total = 1;
  for (std::size_t j = 0; j < cfg.N; ++j) {
    const std::uint64_t c = binomial(cfg.K - j * cfg.M - 1, cfg.M - 1);
    if (c == kMax) return kMax;
    total *= c;
    if (total > kMax) return kMax;
  }
  return static_cast<std::uint64_t>(total);
}

namespace detail {

// Fills blocks[depth..] from the positions left in `remaining`. The first
// block always takes the smallest remaining position, which makes each
// unordered partition appear exactly once.
template <typename Visit>
bool enumerate_blocks(PositionMask remaining, std::size_t packet_length,
                      std::vector<PositionMask>& blocks, Visit& visit) {
  if (remaining == 0) return visit(std::as_const(blocks));
  const PositionMask head = remaining & (~remaining + 1);
  std::vector<std::size_t> rest;
  for (PositionMask m = remaining & ~head; m; m &= m - 1) {
    rest.push_back(static_cast<std::size_t>(std::countr_zero(m)));
  }
  const std::size_t need = packet_length - 1;
  // Lexicographic (M-1)-combinations of `rest`.
  std::vector<std::size_t> idx(need);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (;;) {
    PositionMask block = head;
    for (auto i : idx) block |= PositionMask{1} << rest[i];
    blocks.push_back(block);
    const bool keep_going = enumerate_blocks(remaining & ~block, packet_length, blocks, visit);
    blocks.pop_back();
    if (!keep_going) return false;

    std::size_t i = need;
    while (i > 0 && idx[i - 1] == rest.size() - need + (i - 1)) --i;
    if (i == 0) return true;
    ++idx[i - 1];
    for (std::size_t j = i; j < need; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline PacketGroup group_from_masks(std::span<const PositionMask> blocks, const PartitionConfig& cfg) {
  std::vector<Packet> packets;
  packets.reserve(blocks.size());
  for (auto b : blocks) packets.push_back(Packet::from_mask(b));
  return PacketGroup(std::move(packets), cfg);
}

}  // namespace detail

/// Calls visit(const PacketGroup&) once per unordered partition of 0..K-1
/// into blocks of M, in canonical order ({01|23}, {02|13}, {03|12} for K=4,
/// M=2). If visit returns bool, returning false stops the enumeration.
template <typename Visit>
void for_each_partition(std::size_t tokens, std::size_t packet_length, Visit&& visit) {
  const auto cfg = PartitionConfig::make(tokens, packet_length);
  if (cfg.K > kMaxTokens) throw PartitionError("at most 64 tokens are supported");
  std::vector<PositionMask> blocks;
  blocks.reserve(cfg.N);
  auto adapter = [&](const std::vector<PositionMask>& b) -> bool {
    const auto group = detail::group_from_masks(b, cfg);
    if constexpr (std::is_same_v<std::invoke_result_t<Visit&, const PacketGroup&>, bool>) {
      return visit(group);
    } else {
      visit(group);
      return true;
    }
  };
  detail::enumerate_blocks(low_bits(cfg.K), cfg.M, blocks, adapter);
}

inline std::vector<PacketGroup> enumerate_partitions(std::size_t tokens, std::size_t packet_length,
                                                     std::uint64_t max_partitions = kDefaultMaxPartitions) {
  const auto count = partition_count(tokens, packet_length);
  if (count > max_partitions) {
    throw EnumerationLimitError(std::to_string(count) + " partitions exceed the guard of " +
                                std::to_string(max_partitions));
  }
  std::vector<PacketGroup> out;
  out.reserve(count);
  for_each_partition(tokens, packet_length, [&](const PacketGroup& g) { out.push_back(g); });
  return out;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct GenerationStats {
  double best_ats = 0.0;
  double mean_ats = 0.0;
};

struct SearchResult {
  PacketGroup best_group;
  double best_ats = 0.0;
  std::vector<GenerationStats> history;
  EvalCounter counters;
  std::uint64_t evaluated_groups = 0;
};

namespace detail {

/// Rejects groups that do not partition this message into packets of M.
inline void check_feasible(const PacketGroup& group, const TokenizedMessage& msg, std::size_t packet_length) {
  const auto& c = group.config();
  if (c.K != msg.size() || c.M != packet_length) {
    throw PartitionError("candidate group " + group.to_string() + " does not match K=" +
                         std::to_string(msg.size()) + ", M=" + std::to_string(packet_length));
  }
}

inline PacketGroup single_packet_group(std::size_t tokens) {
  return PacketGroup({Packet::from_mask(low_bits(tokens))}, PartitionConfig::make(tokens, tokens));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Full search
// ---------------------------------------------------------------------------

struct FullSearchOptions {
  std::uint64_t max_partitions = kDefaultMaxPartitions;
  std::size_t max_packets = kDefaultMaxEnumeratedPackets;
};

/// Exhaustive search; ties go to the first partition in enumeration order.
inline SearchResult full_search(SubsetSimilarityCache& cache, std::size_t packet_length,
                                const ErasureModel& model, const FullSearchOptions& options = {}) {
  const auto& msg = cache.message();
  const auto count = partition_count(msg.size(), packet_length);
  if (count > options.max_partitions) {
    throw EnumerationLimitError("full search over " + std::to_string(count) +
                                " partitions exceeds the guard of " + std::to_string(options.max_partitions));
  }
  std::optional<PacketGroup> best;
  double best_ats = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::uint64_t evaluated = 0;
  for_each_partition(msg.size(), packet_length, [&](const PacketGroup& g) {
    const double ats = exact_ats_value(g, model, cache, options.max_packets);
    ++evaluated;
    sum += ats;
    if (ats > best_ats) {
      best_ats = ats;
      best = g;
    }
  });
  SearchResult result{*best, best_ats, {}, cache.counters(), evaluated};
  result.history.push_back({best_ats, sum / static_cast<double>(evaluated)});
  return result;
}

inline SearchResult full_search(const TokenizedMessage& msg, std::size_t packet_length,
                                const ErasureModel& model, const EmbeddingProvider& provider,
                                const FullSearchOptions& options = {}) {
  SubsetSimilarityCache cache(msg, provider);
  return full_search(cache, packet_length, model, options);
}

// ---------------------------------------------------------------------------
// Random aggregation
// ---------------------------------------------------------------------------

/// Seeded Fisher-Yates shuffle of the positions, cut into consecutive blocks of M.
inline PacketGroup random_pa(std::size_t tokens, std::size_t packet_length, std::uint64_t seed) {
  const auto cfg = PartitionConfig::make(tokens, packet_length);
  std::vector<std::size_t> order(cfg.K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = cfg.K; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Packet> packets;
  packets.reserve(cfg.N);
  for (std::size_t b = 0; b < cfg.N; ++b) {
    packets.emplace_back(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(b * cfg.M),
                                                  order.begin() + static_cast<std::ptrdiff_t>((b + 1) * cfg.M)));
  }
  return PacketGroup(std::move(packets), cfg);
}

inline PacketGroup random_pa(const TokenizedMessage& msg, std::size_t packet_length, std::uint64_t seed) {
  return random_pa(msg.size(), packet_length, seed);
}

/// Mean ATS of random_pa over `draws` partitions seeded derive_seed(seed, i).
inline double random_pa_mean_ats(SubsetSimilarityCache& cache, std::size_t packet_length,
                                 const ErasureModel& model, std::uint64_t draws, std::uint64_t seed) {
  if (draws == 0) throw ConfigError("random aggregation needs at least one draw");
  double sum = 0.0;
  for (std::uint64_t i = 0; i < draws; ++i) {
    sum += exact_ats_value(random_pa(cache.message().size(), packet_length, derive_seed(seed, i)), model, cache);
  }
  return sum / static_cast<double>(draws);
}

// ---------------------------------------------------------------------------
// Mutation
// ---------------------------------------------------------------------------

/// Exchanges the tokens at two positions that sit in different packets.
inline PacketGroup swap_tokens(const PacketGroup& group, std::size_t position_a, std::size_t position_b) {
  std::size_t pa = group.packet_count(), pb = group.packet_count();
  for (std::size_t i = 0; i < group.packet_count(); ++i) {
    if (group.packet(i).contains(position_a)) pa = i;
    if (group.packet(i).contains(position_b)) pb = i;
  }
  if (pa == group.packet_count() || pb == group.packet_count()) {
    throw PartitionError("swap position not present in group");
  }
  if (pa == pb) throw PartitionError("swap positions must lie in different packets");
  std::vector<Packet> packets = group.packets();
  const PositionMask a = PositionMask{1} << position_a;
  const PositionMask b = PositionMask{1} << position_b;
  packets[pa] = Packet::from_mask((packets[pa].mask() & ~a) | b);
  packets[pb] = Packet::from_mask((packets[pb].mask() & ~b) | a);
  return PacketGroup(std::move(packets), group.config());
}

/// Picks packets m != n uniformly, then one token uniformly from each, and
/// swaps them; repeated swap_count times. Consumes 4 draws per swap.
inline PacketGroup mutate(const PacketGroup& group, Rng& rng, std::size_t swap_count = 1) {
  const std::size_t n = group.packet_count();
  if (n < 2) throw DegenerateGroupError("mutation needs at least two packets");
  PacketGroup out = group;
  for (std::size_t s = 0; s < swap_count; ++s) {
    const auto first = static_cast<std::size_t>(rng.uniform_below(n));
    auto second = static_cast<std::size_t>(rng.uniform_below(n - 1));
    if (second >= first) ++second;
    const auto& pf = out.packet(first).positions();
    const auto& ps = out.packet(second).positions();
    const std::size_t a = pf[static_cast<std::size_t>(rng.uniform_below(pf.size()))];
    const std::size_t b = ps[static_cast<std::size_t>(rng.uniform_below(ps.size()))];
    out = swap_tokens(out, a, b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Genetic beam search
// ---------------------------------------------------------------------------

struct GBeamConfig {
  std::size_t population = 10;   // L
  std::size_t beam_width = 2;    // B
  std::size_t generations = 5;   // G
  bool elitism = true;           // parents compete with their children
  std::size_t swap_count = 1;    // token swaps per child
  std::uint64_t seed = 0;

  void validate() const {
    if (beam_width < 1 || beam_width > population) {
      throw ConfigError("beam width must satisfy 1 <= B <= L");
    }
    if (population % beam_width != 0) throw ConfigError("population L must be a multiple of beam width B");
    if (generations < 1) throw ConfigError("at least one generation is required");
    if (swap_count < 1) throw ConfigError("swap count must be positive");
  }

  std::size_t children_per_beam() const noexcept { return population / beam_width; }
};

/// Genetic beam search.
///
/// 1. L random groups (random_pa seeded derive_seed(seed, i)).
/// 2. Rank the current population by ATS, keep the top B; ties keep the
///    earlier-created group.
/// 3. Each beam spawns L/B children, one mutate() each.
/// 4. Evaluate the children. The next population is the children, plus the
///    B parents when elitism is on.
/// Steps 2-4 repeat for G generations. The best group ever evaluated is
/// returned; history[0] describes the initial population and history[g] the
/// population after generation g.
inline SearchResult gbeam_search(SubsetSimilarityCache& cache, std::size_t packet_length,
                                 const ErasureModel& model, const GBeamConfig& cfg) {
  cfg.validate();
  const auto& msg = cache.message();
  const auto pcfg = PartitionConfig::make(msg.size(), packet_length);

  if (pcfg.N == 1) {
    auto group = detail::single_packet_group(pcfg.K);
    const double ats = exact_ats_value(group, model, cache);
    SearchResult r{std::move(group), ats, {}, cache.counters(), 1};
    r.history.push_back({ats, ats});
    return r;
  }

  struct Candidate {
    PacketGroup group;
    double ats;
    std::uint64_t created;
  };
  std::uint64_t created = 0;
  std::optional<Candidate> best;
  auto evaluate = [&](PacketGroup group) {
    detail::check_feasible(group, msg, packet_length);
    const double ats = exact_ats_value(group, model, cache);
    Candidate c{std::move(group), ats, created++};
    if (!best || c.ats > best->ats) best = c;
    return c;
  };
  auto stats = [](const std::vector<Candidate>& pop) {
    GenerationStats s{-std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& c : pop) {
      s.best_ats = std::max(s.best_ats, c.ats);
      s.mean_ats += c.ats;
    }
    s.mean_ats /= static_cast<double>(pop.size());
    return s;
  };

  std::vector<Candidate> population;
  population.reserve(cfg.population + cfg.beam_width);
  for (std::size_t i = 0; i < cfg.population; ++i) {
    population.push_back(evaluate(random_pa(pcfg.K, pcfg.M, derive_seed(cfg.seed, i))));
  }
  std::vector<GenerationStats> history{stats(population)};

  Rng rng(derive_seed(cfg.seed, 0x6D75746174696F6EULL));
  for (std::size_t gen = 1; gen <= cfg.generations; ++gen) {
    std::sort(population.begin(), population.end(),
              [](const Candidate& a, const Candidate& b) { return a.created < b.created; });
    std::stable_sort(population.begin(), population.end(),
                     [](const Candidate& a, const Candidate& b) { return a.ats > b.ats; });
    population.erase(population.begin() + static_cast<std::ptrdiff_t>(std::min(cfg.beam_width, population.size())), population.end());

    std::vector<Candidate> next;
    next.reserve(cfg.population + cfg.beam_width);
    if (cfg.elitism) next = population;
    for (const auto& beam : population) {
      for (std::size_t c = 0; c < cfg.children_per_beam(); ++c) {
        next.push_back(evaluate(mutate(beam.group, rng, cfg.swap_count)));
      }
    }
    population = std::move(next);
    history.push_back(stats(population));
  }

  return SearchResult{best->group, best->ats, std::move(history), cache.counters(), created};
}

inline SearchResult gbeam_search(const TokenizedMessage& msg, std::size_t packet_length,
                                 const ErasureModel& model, const EmbeddingProvider& provider,
                                 const GBeamConfig& cfg) {
  SubsetSimilarityCache cache(msg, provider);
  return gbeam_search(cache, packet_length, model, cfg);
}

// ---------------------------------------------------------------------------
// Complexity accounting (text-encoding steps)
// ---------------------------------------------------------------------------

/// Encodings needed to tabulate phi for every token subset: 2^K.
inline std::uint64_t full_search_encodings(std::size_t tokens) { return std::uint64_t{1} << tokens; }

/// Nominal genetic beam search cost G * L * 2^N.
inline std::uint64_t gbeam_encodings(std::size_t generations, std::size_t population, std::size_t packets) {
  return static_cast<std::uint64_t>(generations) * population * (std::uint64_t{1} << packets);
}

/// Cost including the initial population: (G + 1) * L * 2^N.
inline std::uint64_t gbeam_encodings_with_init(std::size_t generations, std::size_t population,
                                               std::size_t packets) {
  return gbeam_encodings(generations + 1, population, packets);
}

}  // namespace sempa
