#pragma once

// Training-free late fusion of two modality distance matrices, and
// nearest-neighbor retrieval over any distance matrix.

#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trisim/corpus.hpp"

namespace trisim {

enum class FusionMode { Uncertainty, Similarity };

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode m);

struct FusionConfig {
  double alpha = 0.7;
  FusionMode mode = FusionMode::Uncertainty;

  void validate() const;
};

// (D - min) / (max - min) over all entries, diagonal included.
DistanceMatrix minmax_normalize(const DistanceMatrix& d);

// Unbiased variance of each row's off-diagonal entries.
Eigen::VectorXd modality_confidence(const DistanceMatrix& normalized);

// Per-item vision weight w_i = a*sv_i / (a*sv_i + (1-a)*st_i); alpha where
// the denominator vanishes.
Eigen::VectorXd fusion_weights(const Eigen::VectorXd& var_vision,
                               const Eigen::VectorXd& var_text, double alpha);

// Inputs must already be min-max normalized and share the same id order.
DistanceMatrix uncertainty_fuse(const DistanceMatrix& vision, const DistanceMatrix& text,
                                double alpha);
DistanceMatrix similarity_fuse(const DistanceMatrix& vision, const DistanceMatrix& text);

// Normalizes both inputs, then fuses per the config.
DistanceMatrix fuse(const DistanceMatrix& vision, const DistanceMatrix& text,
                    const FusionConfig& cfg);

struct Neighbor {
  ItemId id;
  double distance = 0.0;
};

// The k closest other items, ties broken by lexicographic id.
std::vector<Neighbor> nearest_neighbors(const DistanceMatrix& d, const ItemId& id,
                                        std::size_t k);

}  // namespace trisim
