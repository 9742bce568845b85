#include "trisim/distances.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trisim/errors.hpp"

namespace trisim {

Metric parse_metric(std::string_view name) {
  if (name == "euclidean") return Metric::Euclidean;
  if (name == "cosine") return Metric::Cosine;
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected euclidean or cosine)");
}

std::string_view to_string(Metric m) {
  return m == Metric::Euclidean ? "euclidean" : "cosine";
}

DistanceMatrix pairwise_distances(const EmbeddingSet& e, Metric metric) {
  e.validate();
  const auto n = static_cast<Eigen::Index>(e.size());
  if (n < 2) throw DataError("pairwise distances need at least 2 items, got " +
                             std::to_string(n));
  DistanceMatrix d;
  d.ids = e.ids;
  d.values = Eigen::MatrixXd::Zero(n, n);
  if (metric == Metric::Euclidean) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = (e.coords.row(i) - e.coords.row(j)).norm();
        d.values(i, j) = v;
        d.values(j, i) = v;
      }
    }
    return d;
  }
  const Eigen::VectorXd norms = e.coords.rowwise().norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) {
      throw DataError("cosine distance undefined for zero-norm vector '" +
                      e.ids[i] + "'");
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double cos = e.coords.row(i).dot(e.coords.row(j)) / (norms(i) * norms(j));
      const double v = std::clamp(1.0 - cos, 0.0, 2.0);
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  return d;
}

}  // namespace trisim
