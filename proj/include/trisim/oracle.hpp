#pragma once

// Synthetic-expert triplet collection: a chat-completion model is asked,
// for each (anchor, j, k), whether case i is more similar to case j or k.
//
// Wire format (POST to the endpoint URL):
//   {"model": ..., "messages": [{"role":"system","content":...},
//                               {"role":"user","content":...}],
//    "temperature": ...}
// Reply: {"choices": [{"message": {"content": "..."}}]}

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trisim/corpus.hpp"
#include "trisim/synth.hpp"

namespace trisim {

struct CaseDescription {
  ItemId item;
  std::string text;
};

// JSONL, one {"id": ..., "text": ...} object per line.
std::vector<CaseDescription> load_descriptions(const std::filesystem::path& path);
void save_descriptions(const std::filesystem::path& path,
                       std::span<const CaseDescription> descriptions);

inline constexpr std::string_view kComparisonQuestion =
    "Is wound i more similar to wound j or to wound k?";

// Placeholder persona; real deployments should supply their own.
inline constexpr std::string_view kDefaultPersona =
    "You are a clinical specialist experienced in assessing chronic wounds. "
    "Judge similarity by clinical appearance.";

struct PromptMessages {
  std::string system;
  std::string user;
  bool operator==(const PromptMessages&) const = default;
};

// An empty persona is allowed; a warning is written to stderr.
PromptMessages build_prompt(const CaseDescription& anchor, const CaseDescription& ref_j,
                            const CaseDescription& ref_k, std::string_view persona);

enum class ParsedChoice { Left, Right, Unparseable };

// Case-insensitive scan for standalone "j" / "k" tokens; exactly one of the
// two labels must occur.
ParsedChoice parse_choice(std::string_view response);

// Sample of the (anchor, unordered reference pair) universe, canonical order.
std::vector<TripletIndex> sample_triplet_space(std::size_t n_items, double budget_fraction,
                                               std::uint64_t seed);

struct TripletQuery {
  ItemId anchor;
  ItemId ref_j;
  ItemId ref_k;
};

struct OracleConfig {
  std::string endpoint;  // full URL, e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model = "default";
  std::string persona = std::string(kDefaultPersona);
  std::size_t max_parallel = 4;
  std::size_t retry_limit = 2;           // transport-level retries per request
  std::size_t unparseable_retries = 1;   // re-asks before recording Skipped
  double temperature = 0.0;
  double budget_fraction = 1.0;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir;       // empty disables caching
  std::string api_key_env = "ORACLE_API_KEY";
  std::chrono::seconds timeout{120};

  void validate() const;
};

struct OracleRun {
  std::vector<TripletJudgment> judgments;  // canonical order of the queries
  std::size_t n_requests = 0;              // network round trips
  std::size_t n_cache_hits = 0;
  std::size_t n_skipped = 0;
};

// Queries every triplet (bounded parallelism, on-disk cache keyed by model
// and prompt). Throws RemoteError when the endpoint is unreachable or
// rejects the request; cached responses survive for a resumed run.
OracleRun run_oracle(std::span<const CaseDescription> descriptions,
                     std::span<const TripletQuery> queries, const OracleConfig& cfg);

// Cache key for one attempt at a prompt; hex SHA-256.
std::string oracle_cache_key(std::string_view model, std::size_t attempt,
                             const PromptMessages& prompt, double temperature);

}  // namespace trisim
