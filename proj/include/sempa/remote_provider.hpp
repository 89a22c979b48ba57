#pragma once

// Client for the HTTP embedding service.
//
//   POST /embed   {"texts": [..]}  ->  {"dim": D, "model": "<id>", "vectors": [[..], ..]}
//   GET  /health                   ->  {"model": "<id>", "dim": D}
//
// Requests carry at most kMaxBatch texts. A failed request (transport error
// or non-200 status) is retried once before raising ProviderError.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "sempa/embedding.hpp"
#include "sempa/errors.hpp"

namespace sempa {

class RemoteProvider final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kMaxBatch = 256;

  /// base_url like "http://127.0.0.1:8080". Queries /health to learn the dimension.
  explicit RemoteProvider(std::string base_url, int timeout_seconds = 60)
      : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    const auto body = request([&](httplib::Client& cli) { return cli.Get("/health"); });
    try {
      const auto health = nlohmann::json::parse(body);
      model_ = health.at("model").get<std::string>();
      dim_ = health.at("dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError("malformed /health response from " + base_url_ + ": " + e.what());
    }
    if (dim_ == 0) throw ProviderError("embedding service reports dim 0");
  }

  std::size_t dim() const override { return dim_; }
  std::string model_id() const override { return model_; }
  const std::string& url() const noexcept { return base_url_; }

 protected:
  EmbeddingVector do_embed(std::string_view text) const override {
    const std::string one[1] = {std::string(text)};
    return post_embed(one).at(0);
  }

  std::vector<EmbeddingVector> do_embed_batch(std::span<const std::string> texts) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += kMaxBatch) {
      const auto chunk = texts.subspan(start, std::min(kMaxBatch, texts.size() - start));
      auto part = post_embed(chunk);
      std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
  }

 private:
  template <typename Send>
  std::string request(Send&& send) const {
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
      httplib::Client cli(base_url_);
      cli.set_connection_timeout(timeout_seconds_, 0);
      cli.set_read_timeout(timeout_seconds_, 0);
      cli.set_write_timeout(timeout_seconds_, 0);
      auto res = send(cli);
      if (!res) {
        last_error = httplib::to_string(res.error());
      } else if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
      } else {
        return res->body;
      }
    }
    throw ProviderError("embedding service " + base_url_ + " failed: " + last_error);
  }

  std::vector<EmbeddingVector> post_embed(std::span<const std::string> texts) const {
    const std::string payload = nlohmann::json{{"texts", texts}}.dump();
    const auto body = request(
        [&](httplib::Client& cli) { return cli.Post("/embed", payload, "application/json"); });
    std::vector<EmbeddingVector> out;
    try {
      const auto response = nlohmann::json::parse(body);
      for (const auto& v : response.at("vectors")) out.push_back({v.get<std::vector<double>>()});
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError("malformed /embed response: " + std::string(e.what()));
    }
    if (out.size() != texts.size()) {
      throw ProviderError("embedding service returned " + std::to_string(out.size()) + " vectors for " +
                          std::to_string(texts.size()) + " texts");
    }
    return out;
  }

  std::string base_url_;
  int timeout_seconds_;
  std::string model_;
  std::size_t dim_ = 0;
};

}  // namespace sempa
