// Group one caption into packets, compare against exhaustive search, and
// watch a few channel uses.

#include <iomanip>
#include <iostream>

#include "sempa/channel.hpp"
#include "sempa/harness.hpp"

int main() {
  using namespace sempa;

  const auto msg = TokenizedMessage::from_words("The cat that hides inside a small basket");
  AdditiveProvider provider(/*seed=*/7, /*dim=*/64, /*min_weight=*/0.1, /*max_weight=*/10.0);
  SubsetSimilarityCache cache(msg, provider);
  const ErasureModel channel(0.3);
  const std::size_t M = 2;

  GBeamConfig cfg;
  cfg.seed = 1;
  const auto beam = gbeam_search(cache, M, channel, cfg);
  const auto full = full_search(cache, M, channel);
  const auto naive = make_group(msg, {{0, 1}, {2, 3}, {4, 5}, {6, 7}}, M);

  std::cout << std::fixed << std::setprecision(4);
  std::cout << "in-order packets  " << exact_ats_value(naive, channel, cache) << "  " << naive.to_string() << '\n';
  std::cout << "gbeam             " << beam.best_ats << "  " << beam.best_group.to_string() << '\n';
  std::cout << "full search       " << full.best_ats << "  " << full.best_group.to_string() << '\n';
  std::cout << "embeddings computed: " << cache.counters().cache_misses << '\n';

  for (std::uint64_t s = 0; s < 4; ++s) {
    std::cout << "received: " << sample_received_text(msg, beam.best_group, channel, s) << '\n';
  }
}
