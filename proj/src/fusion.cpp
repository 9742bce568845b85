#include "trisim/fusion.hpp"

#include <algorithm>
#include <string>

#include "trisim/errors.hpp"

namespace trisim {

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "uncertainty") return FusionMode::Uncertainty;
  if (name == "similarity") return FusionMode::Similarity;
  throw ConfigError("unknown fusion mode '" + std::string(name) +
                    "' (expected uncertainty or similarity)");
}

std::string_view to_string(FusionMode m) {
  return m == FusionMode::Uncertainty ? "uncertainty" : "similarity";
}

void FusionConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("fusion alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
}

DistanceMatrix minmax_normalize(const DistanceMatrix& d) {
  d.validate();
  if (d.size() < 2) throw DataError("min-max normalization needs at least 2 items");
  const double lo = d.values.minCoeff();
  const double hi = d.values.maxCoeff();
  if (hi == lo) throw DataError("min-max normalization of a constant (degenerate) matrix");
  DistanceMatrix out;
  out.ids = d.ids;
  out.values = (d.values.array() - lo) / (hi - lo);
  return out;
}

Eigen::VectorXd modality_confidence(const DistanceMatrix& normalized) {
  const auto n = static_cast<Eigen::Index>(normalized.size());
  if (n < 3) throw DataError("per-item distance variance needs at least 3 items");
  Eigen::VectorXd var(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) mean += normalized.values(i, j);
    }
    mean /= static_cast<double>(n - 1);
    double ss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dv = normalized.values(i, j) - mean;
      ss += dv * dv;
    }
    var(i) = ss / static_cast<double>(n - 2);
  }
  return var;
}

Eigen::VectorXd fusion_weights(const Eigen::VectorXd& var_vision,
                               const Eigen::VectorXd& var_text, double alpha) {
  if (var_vision.size() != var_text.size()) throw DataError("confidence vectors differ in size");
  Eigen::VectorXd w(var_vision.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    // Equal confidences cancel to alpha; evaluate that case exactly.
    if (var_vision(i) == var_text(i)) {
      w(i) = alpha;
      continue;
    }
    const double num = alpha * var_vision(i);
    const double den = num + (1.0 - alpha) * var_text(i);
    w(i) = den > 0.0 ? num / den : alpha;
  }
  return w;
}

namespace {

void check_aligned(const DistanceMatrix& a, const DistanceMatrix& b) {
  if (a.ids != b.ids) {
    throw DataError("fusion inputs must share the same id list and order");
  }
  a.validate();
  b.validate();
}

}  // namespace

DistanceMatrix uncertainty_fuse(const DistanceMatrix& vision, const DistanceMatrix& text,
                                double alpha) {
  FusionConfig{alpha, FusionMode::Uncertainty}.validate();
  check_aligned(vision, text);
  const Eigen::VectorXd w =
      fusion_weights(modality_confidence(vision), modality_confidence(text), alpha);
  const auto n = static_cast<Eigen::Index>(vision.size());
  DistanceMatrix out;
  out.ids = vision.ids;
  out.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double wbar = 0.5 * (w(i) + w(j));
      const double v = vision.values(i, j);
      const double t = text.values(i, j);
      // Written as an offset from t so equal inputs pass through exactly.
      const double fused = std::clamp(t + wbar * (v - t), std::min(v, t), std::max(v, t));
      out.values(i, j) = fused;
      out.values(j, i) = fused;
    }
  }
  return out;
}

DistanceMatrix similarity_fuse(const DistanceMatrix& vision, const DistanceMatrix& text) {
  check_aligned(vision, text);
  const auto n = static_cast<Eigen::Index>(vision.size());
  DistanceMatrix out;
  out.ids = vision.ids;
  out.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = vision.values(i, j);
      const double t = text.values(i, j);
      const double s = (1.0 - v) * (1.0 - t);
      // Product of similarities never exceeds either factor; the clamp only
      // absorbs rounding.
      const double fused = std::clamp(1.0 - s, std::max(v, t), 1.0);
      out.values(i, j) = fused;
      out.values(j, i) = fused;
    }
  }
  return out;
}

DistanceMatrix fuse(const DistanceMatrix& vision, const DistanceMatrix& text,
                    const FusionConfig& cfg) {
  cfg.validate();
  const auto nv = minmax_normalize(vision);
  const auto nt = minmax_normalize(text);
  return cfg.mode == FusionMode::Uncertainty ? uncertainty_fuse(nv, nt, cfg.alpha)
                                             : similarity_fuse(nv, nt);
}

std::vector<Neighbor> nearest_neighbors(const DistanceMatrix& d, const ItemId& id,
                                        std::size_t k) {
  const auto index = build_id_index(d.ids);
  const auto it = index.find(id);
  if (it == index.end()) throw DataError("unknown id '" + id + "'");
  if (k < 1 || k >= d.size()) {
    throw DataError("k must lie in [1, " + std::to_string(d.size() - 1) + "], got " +
                    std::to_string(k));
  }
  const auto row = static_cast<Eigen::Index>(it->second);
  std::vector<Neighbor> all;
  for (Eigen::Index j = 0; j < d.values.cols(); ++j) {
    if (j != row) all.push_back({d.ids[j], d.values(row, j)});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });
  all.resize(k);
  return all;
}

}  // namespace trisim
