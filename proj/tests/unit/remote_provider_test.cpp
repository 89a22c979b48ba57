#include "sempa/remote_provider.hpp"

#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "sempa/ats.hpp"
#include "sempa/search.hpp"

namespace sempa {
namespace {

// In-process stand-in for the embedding service, backed by a HashProvider.
class FakeService {
 public:
  explicit FakeService(int failures_before_success = 0) : failures_left_(failures_before_success) {
    server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(nlohmann::json{{"model", "fake-encoder"}, {"dim", backend_.dim()}}.dump(),
                      "application/json");
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      ++embed_calls_;
      if (failures_left_ > 0) {
        --failures_left_;
        res.status = 503;
        return;
      }
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(req.body);
      } catch (...) {
        res.status = 400;
        return;
      }
      const auto& texts = body.at("texts");
      if (!texts.is_array() || texts.empty() || texts.size() > 256) {
        res.status = 400;
        return;
      }
      max_batch_ = std::max<std::size_t>(max_batch_, texts.size());
      nlohmann::json vectors = nlohmann::json::array();
      for (const auto& t : texts) vectors.push_back(backend_.embed(t.get<std::string>()).components);
      res.set_content(nlohmann::json{{"dim", backend_.dim()}, {"model", "fake-encoder"}, {"vectors", vectors}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeService() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int embed_calls() const { return embed_calls_; }
  std::size_t max_batch() const { return max_batch_; }
  const HashProvider& backend() const { return backend_; }

 private:
  HashProvider backend_{17, 24};
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> failures_left_;
  std::atomic<int> embed_calls_{0};
  std::atomic<std::size_t> max_batch_{0};
};

TEST(RemoteProvider, ReadsHealthAndEmbedsDeterministically) {
  FakeService service;
  RemoteProvider remote(service.url(), 5);
  EXPECT_EQ(remote.dim(), 24u);
  EXPECT_EQ(remote.model_id(), "fake-encoder");
  const auto a = remote.embed("cat");
  EXPECT_EQ(a, remote.embed("cat"));
  EXPECT_EQ(a, service.backend().embed("cat"));
}

TEST(RemoteProvider, RetriesOnceThenSucceeds) {
  FakeService service(1);
  RemoteProvider remote(service.url(), 5);
  EXPECT_NO_THROW(remote.embed("cat"));
  EXPECT_EQ(service.embed_calls(), 2);
}

TEST(RemoteProvider, GivesUpAfterSecondFailure) {
  FakeService service(2);
  RemoteProvider remote(service.url(), 5);
  EXPECT_THROW(remote.embed("cat"), ProviderError);
  EXPECT_EQ(service.embed_calls(), 2);
}

TEST(RemoteProvider, UnreachableServiceIsProviderError) {
  EXPECT_THROW(RemoteProvider("http://127.0.0.1:1", 1), ProviderError);
}

TEST(RemoteProvider, BatchesSubsetsWithinRequestLimit) {
  FakeService service;
  RemoteProvider remote(service.url(), 5);
  const auto msg = TokenizedMessage::from_words("a b c d e f g h i j");
  SubsetSimilarityCache remote_cache(msg, remote);
  SubsetSimilarityCache local_cache(msg, service.backend());
  const auto g = random_pa(msg, 1, 3);  // 10 packets, 1024 subsets
  const double via_service = exact_ats_value(g, ErasureModel(0.3), remote_cache);
  EXPECT_NEAR(via_service, exact_ats_value(g, ErasureModel(0.3), local_cache), 1e-12);
  EXPECT_LE(service.max_batch(), RemoteProvider::kMaxBatch);
  EXPECT_LE(service.embed_calls(), 6);
}

}  // namespace
}  // namespace sempa
