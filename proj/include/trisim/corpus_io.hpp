#pragma once

// File formats:
//
//   Embeddings   text; header `id,dim=<d>`, then `id,v1,...,vd` per item with
//                shortest round-trip decimal floats.
//   Distances    text; first line is the n ids, then n rows of n values.
//   Features     binary; see kFeatureMagic and save_feature_containers().
//   Judgments    JSONL; keys anchor,left,right,choice,source,annotator,
//                created_at (RFC 3339).
//   Item ids     text; one id per line.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trisim/corpus.hpp"

namespace trisim {

inline constexpr std::string_view kFeatureMagic = "TRIDERM1";

EmbeddingSet read_embeddings(std::istream& in, std::string_view source = "<stream>");
void write_embeddings(std::ostream& out, const EmbeddingSet& e);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& e);

DistanceMatrix read_distances(std::istream& in, std::string_view source = "<stream>");
void write_distances(std::ostream& out, const DistanceMatrix& d);
DistanceMatrix load_distances(const std::filesystem::path& path);
void save_distances(const std::filesystem::path& path, const DistanceMatrix& d);

// Contents of a feature file: either plain containers or view pairs.
struct FeatureFile {
  bool paired = false;
  std::vector<FeatureContainer> containers;
  std::vector<ViewPair> pairs;
};

// Binary layout (all integers little-endian):
//   magic "TRIDERM1" | u32 kind (0 single, 1 paired) | u32 record count
//   record = container, or two containers (view a, view b) when paired
//   container = u32 id_len | id bytes | u32 C | u32 H | u32 W |
//               u32 wound_count | u64 payload_bytes (= 4*C*H*W) |
//               f32[C*H*W] | wound_count x (u32 wid_len | wid bytes |
//               H rows of ceil(W/8) bytes, bit x%8 of byte x/8 = cell x)
std::vector<std::uint8_t> encode_feature_file(const FeatureFile& file);
FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes,
                                std::string_view source = "<buffer>");
FeatureFile load_feature_file(const std::filesystem::path& path);
void save_feature_containers(const std::filesystem::path& path,
                             std::span<const FeatureContainer> containers);
void save_view_pairs(const std::filesystem::path& path,
                     std::span<const ViewPair> pairs);

std::string judgment_to_json_line(const TripletJudgment& j);
TripletJudgment judgment_from_json_line(std::string_view line);
std::vector<TripletJudgment> read_judgments(std::istream& in,
                                            std::string_view source = "<stream>");
void write_judgments(std::ostream& out, std::span<const TripletJudgment> judgments);
std::vector<TripletJudgment> load_judgments(const std::filesystem::path& path);
void save_judgments(const std::filesystem::path& path,
                    std::span<const TripletJudgment> judgments);

std::vector<ItemId> load_item_ids(const std::filesystem::path& path);
void save_item_ids(const std::filesystem::path& path, std::span<const ItemId> ids);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

}  // namespace trisim
