#include "trisim/mock_oracle.hpp"

#include <sstream>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "trisim/errors.hpp"

namespace trisim {

using nlohmann::json;

MockOracleServer::MockOracleServer(Answerer answer, int port)
    : answer_(std::move(answer)), server_(std::make_unique<httplib::Server>()) {
  server_->Post(".*", [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    PromptMessages prompt;
    try {
      const auto body = json::parse(req.body);
      for (const auto& m : body.at("messages")) {
        const auto role = m.at("role").get<std::string>();
        if (role == "system") prompt.system = m.at("content").get<std::string>();
        if (role == "user") prompt.user = m.at("content").get<std::string>();
      }
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    const json reply{{"choices", json::array({{{"index", 0},
                                               {"message", {{"role", "assistant"},
                                                            {"content", answer_(prompt)}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else if (server_->bind_to_port("127.0.0.1", port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ < 0) throw RemoteError("mock oracle could not bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockOracleServer::~MockOracleServer() { stop(); }

void MockOracleServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockOracleServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<CaseDescription> synthetic_descriptions(std::span<const ItemId> ids) {
  std::vector<CaseDescription> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back({id, "Synthetic case " + id + "."});
  return out;
}

MockOracleServer::Answerer latent_distance_answerer(std::span<const CaseDescription> descriptions,
                                                    const EmbeddingSet& latents) {
  const auto index = build_id_index(latents.ids);
  auto rows = std::make_shared<std::unordered_map<std::string, Eigen::VectorXd>>();
  for (const auto& d : descriptions) {
    const auto it = index.find(d.item);
    if (it == index.end()) throw DataError("no latent for described item '" + d.item + "'");
    (*rows)[d.text] = latents.coords.row(static_cast<Eigen::Index>(it->second)).transpose();
  }
  return [rows](const PromptMessages& prompt) -> std::string {
    std::unordered_map<char, const Eigen::VectorXd*> slot;
    std::istringstream in(prompt.user);
    std::string line;
    while (std::getline(in, line)) {
      if (line.size() < 8 || line.compare(0, 5, "Case ") != 0 || line[6] != ':') continue;
      const auto it = rows->find(line.substr(8));
      if (it != rows->end()) slot[line[5]] = &it->second;
    }
    if (slot.size() != 3 || !slot.count('i') || !slot.count('j') || !slot.count('k')) {
      return "unsure";
    }
    const double dj = (*slot['i'] - *slot['j']).norm();
    const double dk = (*slot['i'] - *slot['k']).norm();
    return dj < dk ? "j" : "k";
  };
}

}  // namespace trisim
