#pragma once

// Shared data model: items, feature maps with wound masks, embeddings,
// distance matrices and triplet judgments.

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace trisim {

using ItemId = std::string;

// Ids must be non-empty and free of separators used by the text formats.
void validate_item_id(std::string_view id);

// Maps ids to row positions; throws DataError naming the first duplicate.
using IdIndex = std::unordered_map<ItemId, std::size_t>;
IdIndex build_id_index(std::span<const ItemId> ids);

struct WoundMask {
  std::string id;
  std::vector<std::uint8_t> cells;  // H*W, row-major, 0 or 1

  std::size_t count() const;
};

// One image's backbone feature map, C x H x W row-major, plus wound masks.
struct FeatureContainer {
  ItemId item;
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<float> values;
  std::vector<WoundMask> wounds;

  float at(std::uint32_t c, std::uint32_t y, std::uint32_t x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const WoundMask* find_wound(std::string_view wound_id) const;

  void validate() const;
};

// Two augmented views of the same image; wound ids must match one-to-one.
struct ViewPair {
  ItemId item;
  FeatureContainer view_a;
  FeatureContainer view_b;

  void validate() const;
};

struct EmbeddingSet {
  std::vector<ItemId> ids;
  Eigen::MatrixXd coords;  // n x d

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(coords.cols()); }
  void validate() const;
};

struct DistanceMatrix {
  std::vector<ItemId> ids;
  Eigen::MatrixXd values;

  std::size_t size() const { return ids.size(); }
  // Symmetric within `tolerance`, zero diagonal, finite and nonnegative.
  void validate(double tolerance = 1e-9) const;
};

enum class Choice { Left, Right, Skipped };
enum class Source { Human, Oracle, Synthetic };

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

struct TripletJudgment {
  ItemId anchor;
  ItemId left;
  ItemId right;
  Choice choice = Choice::Skipped;
  Source source = Source::Synthetic;
  std::optional<std::string> annotator;
  Timestamp created_at{};

  void validate() const;
  bool operator==(const TripletJudgment&) const = default;
};

std::string_view to_string(Choice c);
std::string_view to_string(Source s);
Choice parse_choice_name(std::string_view s);
Source parse_source_name(std::string_view s);

std::string format_rfc3339(Timestamp t);
Timestamp parse_rfc3339(std::string_view s);
Timestamp now_timestamp();

}  // namespace trisim
