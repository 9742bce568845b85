#include "trisim/oracle.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "trisim/errors.hpp"

namespace trisim {

using nlohmann::json;

std::vector<CaseDescription> load_descriptions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open descriptions file " + path.string());
  std::vector<CaseDescription> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("text") ||
        !j["text"].is_string()) {
      throw DataError(where + "expected an object with string fields 'id' and 'text'");
    }
    CaseDescription d{j["id"].get<std::string>(), j["text"].get<std::string>()};
    try {
      validate_item_id(d.item);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (d.text.empty()) throw DataError(where + "empty description for '" + d.item + "'");
    if (!seen.emplace(d.item, out.size()).second) {
      throw DataError(where + "duplicate id '" + d.item + "'");
    }
    out.push_back(std::move(d));
  }
  return out;
}

void save_descriptions(const std::filesystem::path& path,
                       std::span<const CaseDescription> descriptions) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write descriptions file " + path.string());
  for (const auto& d : descriptions) {
    out << json{{"id", d.item}, {"text", d.text}}.dump() << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

PromptMessages compose_prompt(const CaseDescription& anchor, const CaseDescription& ref_j,
                              const CaseDescription& ref_k, std::string_view persona) {
  PromptMessages p;
  p.system = std::string(persona);
  std::ostringstream u;
  u << "Case i: " << anchor.text << "\n"
    << "Case j: " << ref_j.text << "\n"
    << "Case k: " << ref_k.text << "\n\n"
    << kComparisonQuestion << "\n"
    << "Answer with a single token: j or k.";
  p.user = u.str();
  return p;
}

}  // namespace

PromptMessages build_prompt(const CaseDescription& anchor, const CaseDescription& ref_j,
                            const CaseDescription& ref_k, std::string_view persona) {
  if (persona.empty()) std::cerr << "warning: oracle persona is empty\n";
  return compose_prompt(anchor, ref_j, ref_k, persona);
}

ParsedChoice parse_choice(std::string_view response) {
  bool saw_j = false;
  bool saw_k = false;
  std::size_t i = 0;
  while (i < response.size()) {
    while (i < response.size() && !std::isalnum(static_cast<unsigned char>(response[i]))) ++i;
    const std::size_t start = i;
    while (i < response.size() && std::isalnum(static_cast<unsigned char>(response[i]))) ++i;
    if (i - start == 1) {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(response[start])));
      saw_j |= c == 'j';
      saw_k |= c == 'k';
    }
  }
  if (saw_j == saw_k) return ParsedChoice::Unparseable;
  return saw_j ? ParsedChoice::Left : ParsedChoice::Right;
}

std::vector<TripletIndex> sample_triplet_space(std::size_t n_items, double budget_fraction,
                                               std::uint64_t seed) {
  if (n_items < 3) throw DataError("triplet sampling needs at least 3 items");
  return sample_triplet_indices(n_items, budget_fraction, seed);
}

void OracleConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("oracle endpoint URL is required");
  if (model.empty()) throw ConfigError("oracle model name is required");
  if (max_parallel < 1) throw ConfigError("max parallel requests must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw ConfigError("budget fraction must lie in (0, 1]");
  }
  if (timeout.count() <= 0) throw ConfigError("request timeout must be positive");
}

std::string oracle_cache_key(std::string_view model, std::size_t attempt,
                             const PromptMessages& prompt, double temperature) {
  const std::string material =
      json{{"model", model}, {"attempt", attempt}, {"system", prompt.system},
           {"user", prompt.user}, {"temperature", temperature}}
          .dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(material.data(), material.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw ConfigError("endpoint '" + url + "' must start with http:// or https://");
  }
  const auto prefix = url.substr(0, scheme);
  if (prefix != "http" && prefix != "https") {
    throw ConfigError("unsupported endpoint scheme '" + prefix + "'");
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

struct CachedReply {
  std::string response;
  Timestamp received_at;
};

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  bool enabled() const { return !dir_.empty(); }

  std::optional<CachedReply> get(const std::string& key) const {
    if (!enabled()) return std::nullopt;
    std::ifstream in(file_for(key));
    if (!in) return std::nullopt;
    try {
      const auto j = json::parse(in);
      return CachedReply{j.at("response").get<std::string>(),
                         parse_rfc3339(j.at("received_at").get<std::string>())};
    } catch (const std::exception&) {
      // A torn or foreign file is treated as a miss and overwritten.
      return std::nullopt;
    }
  }

  void put(const std::string& key, const std::string& model, const CachedReply& reply) {
    if (!enabled()) return;
    std::lock_guard lock(mu_);
    const auto target = file_for(key);
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw DataError("cannot create cache directory " + target.parent_path().string());
    auto tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << json{{"model", model},
                  {"response", reply.response},
                  {"received_at", format_rfc3339(reply.received_at)}}
                 .dump()
          << '\n';
      if (!out) throw DataError("cannot write cache entry " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw DataError("cannot move cache entry into place: " + ec.message());
  }

 private:
  std::filesystem::path file_for(const std::string& key) const {
    return dir_ / key.substr(0, 2) / (key + ".json");
  }

  std::filesystem::path dir_;
  std::mutex mu_;
};

class ChatClient {
 public:
  ChatClient(const Endpoint& ep, const OracleConfig& cfg) : path_(ep.path), cfg_(cfg),
                                                            client_(ep.base) {
    client_.set_connection_timeout(10);
    client_.set_read_timeout(static_cast<time_t>(cfg.timeout.count()));
    client_.set_write_timeout(static_cast<time_t>(cfg.timeout.count()));
    if (!cfg.api_key_env.empty()) {
      if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key) {
        headers_.emplace("Authorization", std::string("Bearer ") + key);
      }
    }
  }

  std::string complete(const PromptMessages& prompt) {
    json messages = json::array();
    if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    const std::string body =
        json{{"model", cfg_.model}, {"messages", messages}, {"temperature", cfg_.temperature}}
            .dump();
    std::string last_error;
    for (std::size_t attempt = 0; attempt <= cfg_.retry_limit; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(250 * attempt));
      auto res = client_.Post(path_, headers_, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw RemoteError("oracle endpoint rejected credentials (HTTP " +
                          std::to_string(res->status) + ")");
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw RemoteError("oracle endpoint returned HTTP " + std::to_string(res->status) +
                          ": " + res->body.substr(0, 200));
      }
      try {
        const auto j = json::parse(res->body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        return content.is_string() ? content.get<std::string>() : std::string();
      } catch (const std::exception& e) {
        throw RemoteError(std::string("malformed chat-completion reply: ") + e.what());
      }
    }
    throw RemoteError("oracle endpoint unreachable after " +
                      std::to_string(cfg_.retry_limit + 1) + " attempt(s): " + last_error);
  }

 private:
  std::string path_;
  const OracleConfig& cfg_;
  httplib::Client client_;
  httplib::Headers headers_;
};

}  // namespace

OracleRun run_oracle(std::span<const CaseDescription> descriptions,
                     std::span<const TripletQuery> queries, const OracleConfig& cfg) {
  cfg.validate();
  const Endpoint ep = split_endpoint(cfg.endpoint);
  std::unordered_map<std::string_view, const CaseDescription*> by_id;
  for (const auto& d : descriptions) by_id.emplace(d.item, &d);
  auto describe = [&](const ItemId& id) -> const CaseDescription& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("no description for item '" + id + "'");
    return *it->second;
  };
  for (const auto& q : queries) {
    describe(q.anchor);
    describe(q.ref_j);
    describe(q.ref_k);
    if (q.anchor == q.ref_j || q.anchor == q.ref_k || q.ref_j == q.ref_k) {
      throw DataError("triplet (" + q.anchor + ", " + q.ref_j + ", " + q.ref_k +
                      ") repeats an item");
    }
  }
  if (cfg.persona.empty()) std::cerr << "warning: oracle persona is empty\n";

  ResponseCache cache(cfg.cache_dir);
  OracleRun run;
  run.judgments.resize(queries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> n_requests{0};
  std::atomic<std::size_t> n_hits{0};
  std::atomic<bool> failed{false};
  std::mutex error_mu;
  std::string first_error;
  bool first_is_data = false;

  auto worker = [&] {
    std::optional<ChatClient> client;
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= queries.size()) return;
      const auto& q = queries[i];
      try {
        const auto prompt =
            compose_prompt(describe(q.anchor), describe(q.ref_j), describe(q.ref_k),
                                cfg.persona);
        TripletJudgment out;
        out.anchor = q.anchor;
        out.left = q.ref_j;
        out.right = q.ref_k;
        out.source = Source::Oracle;
        out.annotator = cfg.model;
        out.choice = Choice::Skipped;
        for (std::size_t attempt = 0; attempt <= cfg.unparseable_retries; ++attempt) {
          const auto key = oracle_cache_key(cfg.model, attempt, prompt, cfg.temperature);
          auto reply = cache.get(key);
          if (reply) {
            ++n_hits;
          } else {
            if (!client) client.emplace(ep, cfg);
            ++n_requests;
            std::string text = client->complete(prompt);
            reply = CachedReply{std::move(text), now_timestamp()};
            cache.put(key, cfg.model, *reply);
          }
          out.created_at = reply->received_at;
          const auto parsed = parse_choice(reply->response);
          if (parsed != ParsedChoice::Unparseable) {
            out.choice = parsed == ParsedChoice::Left ? Choice::Left : Choice::Right;
            break;
          }
        }
        run.judgments[i] = std::move(out);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mu);
        if (!failed.exchange(true)) {
          first_error = e.what();
          first_is_data = dynamic_cast<const DataError*>(&e) != nullptr;
        }
        return;
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(
      1, std::min(cfg.max_parallel, queries.size()));
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failed) {
    if (first_is_data) throw DataError(first_error);
    throw RemoteError(first_error);
  }
  run.n_requests = n_requests.load();
  run.n_cache_hits = n_hits.load();
  for (const auto& j : run.judgments) run.n_skipped += j.choice == Choice::Skipped ? 1 : 0;
  return run;
}

}  // namespace trisim
