#pragma once

// Precomputed embeddings loaded from a JSON-lines cache file.
//
//   {"dim": D, "model": "<id>", "normalized": true}      header, first line
//   {"text": "<rendered text>", "vector": [D reals]}     one line per text
//
// Lookups are by exact rendered text, so a cache exported for a corpus with
// the same detokenization rules never misses.

#include <fstream>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"

namespace sempa {

class FileCacheProvider final : public EmbeddingProvider {
 public:
  /// strict: a missing text raises ProviderError. Otherwise the fallback
  /// provider (which must share the cache's dimension) answers misses.
  static std::unique_ptr<FileCacheProvider> load(const std::string& path, bool strict = true,
                                                 std::shared_ptr<const EmbeddingProvider> fallback = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding cache " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("embedding cache " + path + " is empty");
    auto cache = std::unique_ptr<FileCacheProvider>(new FileCacheProvider());
    cache->strict_ = strict;
    cache->fallback_ = std::move(fallback);
    try {
      const auto header = nlohmann::json::parse(line);
      cache->dim_ = header.at("dim").get<std::size_t>();
      cache->model_ = header.value("model", std::string("unknown"));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad embedding cache header in " + path + ": " + e.what());
    }
    if (cache->dim_ == 0) throw IoError("embedding cache " + path + " declares dim 0");
    if (cache->fallback_ && cache->fallback_->dim() != cache->dim_) {
      throw ConfigError("fallback provider dimension does not match the cache");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const auto row = nlohmann::json::parse(line);
        EmbeddingVector v{row.at("vector").get<std::vector<double>>()};
        detail::check_vector(v, cache->dim_, "embedding cache");
        cache->vectors_.insert_or_assign(row.at("text").get<std::string>(), v.normalized());
      } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
      } catch (const ProviderError& e) {
        throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    return cache;
  }

  std::size_t dim() const override { return dim_; }
  std::string model_id() const override { return model_; }
  std::size_t entries() const noexcept { return vectors_.size(); }
  bool strict() const noexcept { return strict_; }
  bool contains(std::string_view text) const { return vectors_.contains(std::string(text)); }

 protected:
  EmbeddingVector do_embed(std::string_view text) const override {
    if (auto it = vectors_.find(std::string(text)); it != vectors_.end()) return it->second;
    if (strict_ || !fallback_) {
      throw ProviderError("embedding cache has no entry for \"" + std::string(text) + "\"");
    }
    return fallback_->embed(text);
  }

 private:
  FileCacheProvider() = default;

  std::size_t dim_ = 0;
  std::string model_;
  bool strict_ = true;
  std::shared_ptr<const EmbeddingProvider> fallback_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

/// Writes a cache file in the format read by FileCacheProvider::load.
inline void write_embedding_cache(const std::string& path, std::string_view model,
                                  const std::vector<std::pair<std::string, EmbeddingVector>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embedding cache " + path);
  const std::size_t dim = rows.empty() ? 0 : rows.front().second.dim();
  out << nlohmann::json{{"dim", dim}, {"model", model}, {"normalized", true}}.dump() << '\n';
  for (const auto& [text, vec] : rows) {
    if (vec.dim() != dim) throw DimensionMismatch("cache rows must share one dimension");
    out << nlohmann::json{{"text", text}, {"vector", vec.normalized().components}}.dump() << '\n';
  }
  if (!out) throw IoError("failed writing embedding cache " + path);
}

}  // namespace sempa
