#pragma once

// In-process chat-completion server for exercising the oracle client
// without a real model.

#include <atomic>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <thread>

#include "trisim/corpus.hpp"
#include "trisim/oracle.hpp"

namespace httplib {
class Server;
}

namespace trisim {

class MockOracleServer {
 public:
  // Maps the received prompt to the reply content.
  using Answerer = std::function<std::string(const PromptMessages&)>;

  // Binds 127.0.0.1 on the given port (0 picks a free one) and starts serving.
  explicit MockOracleServer(Answerer answer, int port = 0);
  ~MockOracleServer();
  MockOracleServer(const MockOracleServer&) = delete;
  MockOracleServer& operator=(const MockOracleServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const;
  std::size_t request_count() const { return requests_.load(); }
  void stop();

 private:
  Answerer answer_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
};

// One-line description per item: "Synthetic case <id>."
std::vector<CaseDescription> synthetic_descriptions(std::span<const ItemId> ids);

// Answers "j" or "k" by which reference is nearer the anchor in latent
// space; the case texts in the prompt identify the items.
MockOracleServer::Answerer latent_distance_answerer(std::span<const CaseDescription> descriptions,
                                                    const EmbeddingSet& latents);

}  // namespace trisim
