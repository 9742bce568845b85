#pragma once

#include <string_view>

#include "trisim/corpus.hpp"

namespace trisim {

enum class Metric { Euclidean, Cosine };

Metric parse_metric(std::string_view name);
std::string_view to_string(Metric m);

// Euclidean: ||x_i - x_j||_2. Cosine: 1 - cos(x_i, x_j); zero-norm rows are
// rejected. Requires at least two items.
DistanceMatrix pairwise_distances(const EmbeddingSet& e, Metric metric = Metric::Euclidean);

}  // namespace trisim
