#pragma once

// Exact Average Token Similarity over a packet erasure channel.
//
// Each of the N packets arrives intact with probability 1 - p and is erased
// otherwise, independently. The ATS of a group is
//
//   sum over packet subsets H:  (1-p)^|H| * p^(N-|H|) * phi(render(H), W)
//
// enumerated in ascending bitmask order.

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sempa/core.hpp"
#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"

namespace sempa {

inline constexpr std::size_t kDefaultMaxEnumeratedPackets = 20;

class ErasureModel {
 public:
  explicit ErasureModel(double loss_probability) : p_(loss_probability) {
    if (!(p_ >= 0.0 && p_ <= 1.0)) {
      throw ConfigError("packet loss probability must lie in [0, 1], got " + std::to_string(p_));
    }
  }

  double loss_probability() const noexcept { return p_; }

 private:
  double p_;
};

/// (1-p)^h * p^(N-h); 0^0 is taken as 1.
inline double subset_weight(const ErasureModel& model, std::size_t survivors, std::size_t packets) {
  const double p = model.loss_probability();
  return std::pow(1.0 - p, static_cast<double>(survivors)) *
         std::pow(p, static_cast<double>(packets - survivors));
}

struct SubsetTerm {
  std::uint64_t packet_subset = 0;
  double weight = 0.0;
  double similarity = 0.0;
};

struct AtsReport {
  double ats = 0.0;
  std::vector<SubsetTerm> per_subset;
  EvalCounter counter_snapshot;
};

namespace detail {

inline void check_enumerable(const PacketGroup& group, std::size_t max_packets) {
  if (group.packet_count() > max_packets || group.packet_count() >= 63) {
    throw EnumerationLimitError("exact ATS over " + std::to_string(group.packet_count()) +
                                " packets exceeds the enumeration guard of " + std::to_string(max_packets));
  }
}

inline std::vector<double> weights_by_count(const ErasureModel& model, std::size_t packets) {
  std::vector<double> w(packets + 1);
  for (std::size_t h = 0; h <= packets; ++h) w[h] = subset_weight(model, h, packets);
  return w;
}

}  // namespace detail

/// ATS value only; this is the hot path used by the optimizers.
inline double exact_ats_value(const PacketGroup& group, const ErasureModel& model,
                              SubsetSimilarityCache& cache,
                              std::size_t max_packets = kDefaultMaxEnumeratedPackets) {
  detail::check_enumerable(group, max_packets);
  const std::size_t n = group.packet_count();
  const std::uint64_t subsets = std::uint64_t{1} << n;
  const auto weights = detail::weights_by_count(model, n);

  std::vector<PositionMask> masks(subsets);
  for (std::uint64_t h = 0; h < subsets; ++h) masks[h] = group.survivors(h);
  cache.prefetch(masks);

  double total = 0.0;
  for (std::uint64_t h = 0; h < subsets; ++h) {
    const double sim = cache.similarity(masks[h]);
    total += weights[std::popcount(h)] * sim;
  }
  return total;
}

inline AtsReport exact_ats(const PacketGroup& group, const ErasureModel& model,
                           SubsetSimilarityCache& cache,
                           std::size_t max_packets = kDefaultMaxEnumeratedPackets) {
  detail::check_enumerable(group, max_packets);
  const std::size_t n = group.packet_count();
  const std::uint64_t subsets = std::uint64_t{1} << n;
  const auto weights = detail::weights_by_count(model, n);

  std::vector<PositionMask> masks(subsets);
  for (std::uint64_t h = 0; h < subsets; ++h) masks[h] = group.survivors(h);
  cache.prefetch(masks);

  AtsReport report;
  report.per_subset.reserve(subsets);
  for (std::uint64_t h = 0; h < subsets; ++h) {
    SubsetTerm term{h, weights[std::popcount(h)], cache.similarity(masks[h])};
    report.ats += term.weight * term.similarity;
    report.per_subset.push_back(term);
  }
  report.counter_snapshot = cache.counters();
  return report;
}

/// ATS with every token in one packet: (1-p)*phi(W,W) + p*phi(empty,W) = 1 - p.
inline double single_packet_ats(const TokenizedMessage& /*msg*/, const ErasureModel& model) {
  return 1.0 - model.loss_probability();
}

}  // namespace sempa
