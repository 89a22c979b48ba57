#pragma once

// Portable random streams.
//
// Every stochastic component draws from std::mt19937_64, whose output
// sequence is fixed by the C++ standard. The standard distributions are not
// (their algorithms differ between library vendors), so the conversions
// below are spelled out here:
//
//   uniform01()      (x >> 11) * 2^-53, a double in [0, 1)
//   uniform_below(n) rejection sampling on x < 2^64 - (2^64 mod n), then x mod n
//
// Sub-seeds are derived with the SplitMix64 finalizer applied to
// seed ^ (index * golden-ratio constant), so (seed, index) pairs map to
// well-separated generator states independent of scheduling.

#include <cstdint>
#include <random>
#include <string_view>

namespace sempa {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed ^ splitmix64(index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
}

/// 64-bit FNV-1a; used to fold strings (sentence ids, texts) into seeds.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= limit) return x % n;
    }
  }

  /// True with probability p (consumes exactly one draw).
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sempa
