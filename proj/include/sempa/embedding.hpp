#pragma once

// Text encoders g(.) and the cosine similarity phi(x, y) built on them.
//
// EmbeddingProvider is the encoder abstraction. Two synthetic providers ship
// with the library:
//
//   HashProvider      seeded hash of the whole text -> pseudo-random unit vector.
//                     Arbitrary geometry, useful for stress and counter tests.
//   AdditiveProvider  each token surface owns a unit direction and an importance
//                     weight; a text embeds to the normalized weighted sum of its
//                     tokens. Gives a controllable notion of which tokens carry
//                     meaning, small enough to verify optimizers by brute force.
//
// SubsetSimilarityCache memoizes phi(reconstruct(survivors), message) per
// survivor mask and keeps the encoding counters used for complexity reports.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sempa/core.hpp"
#include "sempa/errors.hpp"
#include "sempa/rng.hpp"

namespace sempa {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

struct EmbeddingVector {
  std::vector<double> components;

  std::size_t dim() const noexcept { return components.size(); }

  double norm() const noexcept {
    double s = 0.0;
    for (double c : components) s += c * c;
    return std::sqrt(s);
  }

  EmbeddingVector normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ZeroNormError("cannot normalize a zero or non-finite vector");
    EmbeddingVector out{components};
    for (double& c : out.components) c /= n;
    return out;
  }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

/// a.b / (|a| |b|), clamped to [-1, 1].
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("cosine of vectors with dimensions " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.components[i] * b.components[i];
    na += a.components[i] * a.components[i];
    nb += b.components[i] * b.components[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw ZeroNormError("cosine with a zero-norm vector");
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

/// Text-encoding accounting. raw_requests follows the usual per-evaluation
/// accounting (no reuse across candidates); cache_misses counts texts that
/// were actually sent through the encoder.
struct EvalCounter {
  std::uint64_t raw_requests = 0;
  std::uint64_t cache_misses = 0;

  friend EvalCounter operator-(const EvalCounter& a, const EvalCounter& b) {
    return {a.raw_requests - b.raw_requests, a.cache_misses - b.cache_misses};
  }
  friend bool operator==(const EvalCounter&, const EvalCounter&) = default;
};

namespace detail {

inline void check_vector(const EmbeddingVector& v, std::size_t expected_dim, std::string_view who) {
  if (v.dim() != expected_dim) {
    throw ProviderError(std::string(who) + " returned dimension " + std::to_string(v.dim()) +
                        ", expected " + std::to_string(expected_dim));
  }
  double s = 0.0;
  for (double c : v.components) {
    if (!std::isfinite(c)) throw ProviderError(std::string(who) + " returned a non-finite component");
    s += c * c;
  }
  if (!(s > 0.0)) throw ProviderError(std::string(who) + " returned a zero vector");
}

/// Deterministic pseudo-random unit vector for a (seed, key) pair.
inline EmbeddingVector seeded_direction(std::uint64_t seed, std::string_view key, std::size_t dim) {
  Rng rng(derive_seed(seed, fnv1a64(key)));
  EmbeddingVector v;
  v.components.resize(dim);
  for (;;) {
    for (double& c : v.components) c = 2.0 * rng.uniform01() - 1.0;
    if (v.norm() > 1e-6) return v.normalized();
  }
}

inline std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace detail

/// Encoder g(.). Implementations must be safe for concurrent const calls.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  EmbeddingProvider() = default;
  EmbeddingProvider(const EmbeddingProvider&) = delete;
  EmbeddingProvider& operator=(const EmbeddingProvider&) = delete;

  EmbeddingVector embed(std::string_view text) const {
    auto v = do_embed(text);
    detail::check_vector(v, dim(), model_id());
    calls_.fetch_add(1, std::memory_order_relaxed);
    return v;
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
    auto out = do_embed_batch(texts);
    if (out.size() != texts.size()) throw ProviderError(model_id() + " returned a misaligned batch");
    for (const auto& v : out) detail::check_vector(v, dim(), model_id());
    calls_.fetch_add(texts.size(), std::memory_order_relaxed);
    return out;
  }

  /// Embeds the rendering of each survivor mask of msg. The default renders
  /// text with reconstruct_text; token-aware providers may work directly on
  /// the surviving tokens.
  virtual std::vector<EmbeddingVector> embed_subsets(const TokenizedMessage& msg,
                                                     std::span<const PositionMask> masks) const {
    std::vector<std::string> texts;
    texts.reserve(masks.size());
    for (auto m : masks) texts.push_back(reconstruct_text(msg, m));
    return embed_batch(texts);
  }

  virtual std::size_t dim() const = 0;
  virtual std::string model_id() const = 0;

  /// Number of texts encoded so far by this instance.
  std::uint64_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual EmbeddingVector do_embed(std::string_view text) const = 0;

  virtual std::vector<EmbeddingVector> do_embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(do_embed(t));
    return out;
  }

  void count_calls(std::uint64_t n) const noexcept { calls_.fetch_add(n, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// Seeded hash of the full text into a unit vector.
class HashProvider final : public EmbeddingProvider {
 public:
  explicit HashProvider(std::uint64_t seed, std::size_t dim = kDefaultEmbeddingDim)
      : seed_(seed), dim_(dim) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
  }

  std::size_t dim() const override { return dim_; }
  std::string model_id() const override { return "hash:seed=" + std::to_string(seed_); }

 protected:
  EmbeddingVector do_embed(std::string_view text) const override {
    return detail::seeded_direction(seed_, text, dim_);
  }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Weighted bag of token directions.
///
/// Surfaces without an explicit entry receive a seeded pseudo-random unit
/// direction and a log-uniform weight in [min_weight, max_weight].
class AdditiveProvider final : public EmbeddingProvider {
 public:
  struct Entry {
    EmbeddingVector direction;  // unit norm
    double weight = 1.0;
  };

  explicit AdditiveProvider(std::uint64_t seed, std::size_t dim = kDefaultEmbeddingDim,
                            double min_weight = 1.0, double max_weight = 1.0)
      : seed_(seed), dim_(dim), min_weight_(min_weight), max_weight_(max_weight) {
    if (dim_ == 0) throw ConfigError("embedding dimension must be positive");
    if (!(min_weight_ > 0.0) || !(max_weight_ >= min_weight_)) {
      throw ConfigError("additive weights need 0 < min_weight <= max_weight");
    }
  }

  /// Mutually orthogonal unit directions e_0, e_1, ... assigned to the given
  /// surfaces in order, with the given weights (all 1 when empty).
  static std::unique_ptr<AdditiveProvider> orthonormal(std::span<const std::string> surfaces,
                                                       std::span<const double> weights = {},
                                                       std::size_t dim = kDefaultEmbeddingDim) {
    if (surfaces.size() > dim) throw ConfigError("more surfaces than embedding dimensions");
    if (!weights.empty() && weights.size() != surfaces.size()) {
      throw ConfigError("weights must align with surfaces");
    }
    auto provider = std::make_unique<AdditiveProvider>(0, dim);
    for (std::size_t i = 0; i < surfaces.size(); ++i) {
      EmbeddingVector e;
      e.components.assign(dim, 0.0);
      e.components[i] = 1.0;
      provider->set_entry(surfaces[i], std::move(e), weights.empty() ? 1.0 : weights[i]);
    }
    return provider;
  }

  void set_entry(std::string surface, EmbeddingVector direction, double weight) {
    if (direction.dim() != dim_) throw DimensionMismatch("token direction has the wrong dimension");
    if (!(weight > 0.0) || !std::isfinite(weight)) throw ConfigError("token weight must be positive");
    table_[std::move(surface)] = Entry{direction.normalized(), weight};
  }

  Entry entry(std::string_view surface) const {
    if (auto it = table_.find(std::string(surface)); it != table_.end()) return it->second;
    Entry e;
    e.direction = detail::seeded_direction(seed_, surface, dim_);
    if (max_weight_ > min_weight_) {
      Rng rng(derive_seed(seed_ ^ 0x5745494748540000ULL, fnv1a64(surface)));
      e.weight = min_weight_ * std::pow(max_weight_ / min_weight_, rng.uniform01());
    } else {
      e.weight = min_weight_;
    }
    return e;
  }

  std::vector<EmbeddingVector> embed_subsets(const TokenizedMessage& msg,
                                             std::span<const PositionMask> masks) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(masks.size());
    std::vector<Entry> entries;
    entries.reserve(msg.size());
    for (const auto& t : msg.tokens()) entries.push_back(entry(t.surface));
    for (auto mask : masks) {
      EmbeddingVector sum;
      sum.components.assign(dim_, 0.0);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        if ((mask >> i) & 1U) accumulate(sum, entries[i]);
      }
      out.push_back(finish(sum));
    }
    count_calls(masks.size());
    return out;
  }

  std::size_t dim() const override { return dim_; }
  std::string model_id() const override { return "additive:seed=" + std::to_string(seed_); }

 protected:
  /// Whitespace-split surfaces; continuation markers are not interpreted.
  EmbeddingVector do_embed(std::string_view text) const override {
    EmbeddingVector sum;
    sum.components.assign(dim_, 0.0);
    for (auto word : detail::split_words(text)) accumulate(sum, entry(word));
    return finish(sum);
  }

 private:
  static void accumulate(EmbeddingVector& sum, const Entry& e) {
    for (std::size_t d = 0; d < sum.components.size(); ++d) {
      sum.components[d] += e.weight * e.direction.components[d];
    }
  }

  EmbeddingVector finish(const EmbeddingVector& sum) const {
    if (!(sum.norm() > 0.0)) throw ProviderError("additive embedding of an empty or cancelling token set");
    return sum.normalized();
  }

  std::uint64_t seed_;
  std::size_t dim_;
  double min_weight_;
  double max_weight_;
  std::unordered_map<std::string, Entry> table_;
};

/// Memoized phi(reconstruct_text(msg, mask), msg.text()) keyed by survivor mask.
///
/// The empty reception scores 0 and costs nothing. Every other query counts
/// as one raw request; the reference embedding g(W) counts once as a request
/// and a miss. Lookups may run concurrently; insertion is serialized.
class SubsetSimilarityCache {
 public:
  SubsetSimilarityCache(const TokenizedMessage& msg, const EmbeddingProvider& provider)
      : msg_(msg), provider_(provider) {}

  SubsetSimilarityCache(const SubsetSimilarityCache&) = delete;
  SubsetSimilarityCache& operator=(const SubsetSimilarityCache&) = delete;

  const TokenizedMessage& message() const noexcept { return msg_; }
  const EmbeddingProvider& provider() const noexcept { return provider_; }

  double similarity(PositionMask survivors) {
    survivors &= msg_.full_mask();
    if (survivors == 0) return 0.0;
    raw_.fetch_add(1, std::memory_order_relaxed);
    if (auto hit = lookup(survivors)) return *hit;
    ensure_reference();
    if (auto hit = lookup(survivors)) return *hit;  // full mask
    const PositionMask one[1] = {survivors};
    auto vectors = provider_.embed_subsets(msg_, one);
    return insert(survivors, vectors.at(0));
  }

  /// Embeds every not-yet-cached mask in one provider batch. Does not count
  /// raw requests; those are charged when similarity() is queried.
  void prefetch(std::span<const PositionMask> masks) {
    ensure_reference();
    std::vector<PositionMask> missing;
    {
      std::shared_lock lock(mutex_);
      for (auto m : masks) {
        m &= msg_.full_mask();
        if (m != 0 && !values_.contains(m)) missing.push_back(m);
      }
    }
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    if (missing.empty()) return;
    auto vectors = provider_.embed_subsets(msg_, missing);
    if (vectors.size() != missing.size()) throw ProviderError("provider returned a misaligned batch");
    for (std::size_t i = 0; i < missing.size(); ++i) insert(missing[i], vectors[i]);
  }

  bool contains(PositionMask survivors) const {
    std::shared_lock lock(mutex_);
    return values_.contains(survivors & msg_.full_mask());
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return values_.size();
  }

  EvalCounter counters() const noexcept {
    return {raw_.load(std::memory_order_relaxed), misses_.load(std::memory_order_relaxed)};
  }

 private:
  std::optional<double> lookup(PositionMask m) const {
    std::shared_lock lock(mutex_);
    if (auto it = values_.find(m); it != values_.end()) return it->second;
    return std::nullopt;
  }

  void ensure_reference() {
    std::call_once(reference_once_, [this] {
      const PositionMask full[1] = {msg_.full_mask()};
      reference_ = provider_.embed_subsets(msg_, full).at(0);
      raw_.fetch_add(1, std::memory_order_relaxed);
      misses_.fetch_add(1, std::memory_order_relaxed);
      std::unique_lock lock(mutex_);
      values_.emplace(msg_.full_mask(), cosine(reference_, reference_));
    });
  }

  double insert(PositionMask m, const EmbeddingVector& v) {
    const double s = cosine(v, reference_);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = values_.emplace(m, s);
    if (inserted) misses_.fetch_add(1, std::memory_order_relaxed);
    return it->second;
  }

  const TokenizedMessage& msg_;
  const EmbeddingProvider& provider_;
  EmbeddingVector reference_;
  std::once_flag reference_once_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<PositionMask, double> values_;
  std::atomic<std::uint64_t> raw_{0};
  std::atomic<std::uint64_t> misses_{0};
};

/// subset_similarity through the memo layer.
inline double subset_similarity(SubsetSimilarityCache& cache, PositionMask survivors) {
  return cache.similarity(survivors);
}

}  // namespace sempa
