#pragma once

// Monte Carlo packet erasure channel.
//
// Trial t draws from its own generator seeded with derive_seed(seed, t) and
// consumes exactly N uniforms, one per packet in packet order; packet i is
// erased when its uniform is below p. Traces are therefore identical for a
// given seed regardless of how trials are scheduled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sempa/ats.hpp"
#include "sempa/core.hpp"
#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"
#include "sempa/rng.hpp"

namespace sempa {

struct ChannelTrial {
  std::uint64_t survivor_subset = 0;  // bit i set when packet i arrived
  double similarity = 0.0;

  friend bool operator==(const ChannelTrial&, const ChannelTrial&) = default;
};

struct ChannelTrace {
  std::uint64_t seed = 0;
  std::vector<ChannelTrial> trials;
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Packets surviving one channel use, as a packet-subset bitmask.
inline std::uint64_t draw_survivors(Rng& rng, std::size_t packets, const ErasureModel& model) {
  std::uint64_t survivors = 0;
  for (std::size_t i = 0; i < packets; ++i) {
    if (!rng.bernoulli(model.loss_probability())) survivors |= std::uint64_t{1} << i;
  }
  return survivors;
}

inline ChannelTrace simulate(const PacketGroup& group, const ErasureModel& model,
                             std::uint64_t trials, std::uint64_t seed, SubsetSimilarityCache& cache) {
  if (trials == 0) throw ConfigError("simulate needs at least one trial");
  if (group.packet_count() >= 64) throw EnumerationLimitError("too many packets for a survivor bitmask");
  ChannelTrace trace;
  trace.seed = seed;
  trace.trials.reserve(trials);
  double sum = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto survivors = draw_survivors(rng, group.packet_count(), model);
    const double sim = cache.similarity(group.survivors(survivors));
    trace.trials.push_back({survivors, sim});
    sum += sim;
  }
  const double n = static_cast<double>(trials);
  trace.mean = sum / n;
  if (trials > 1) {
    double ss = 0.0;
    for (const auto& tr : trace.trials) ss += (tr.similarity - trace.mean) * (tr.similarity - trace.mean);
    trace.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  // mean stays inside [min, max] similarity
  const auto [lo, hi] = std::minmax_element(trace.trials.begin(), trace.trials.end(),
                                            [](const auto& a, const auto& b) { return a.similarity < b.similarity; });
  trace.mean = std::clamp(trace.mean, lo->similarity, hi->similarity);
  return trace;
}

/// Text received after one channel use.
inline std::string sample_received_text(const TokenizedMessage& msg, const PacketGroup& group,
                                        const ErasureModel& model, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  return reconstruct_text(msg, group.survivors(draw_survivors(rng, group.packet_count(), model)));
}

}  // namespace sempa
