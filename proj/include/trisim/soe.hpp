#pragma once

// Soft ordinal embedding: coordinates fitted to triplet constraints
// "anchor is closer to `closer` than to `farther`" by minimizing
//   sum max(0, margin + ||x_a - x_closer|| - ||x_a - x_farther||)
// with Euclidean (unsquared) norms, anchor-balanced resampling and AMSGrad.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trisim/corpus.hpp"

namespace trisim {

struct SoeConfig {
  std::size_t dim = 4;
  double margin = 0.0;
  double learning_rate = 0.05;
  std::size_t batch_size = 2048;
  std::size_t epochs = 50;
  bool amsgrad = true;
  bool anchor_balanced = true;
  double init_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TripletConstraint {
  std::uint32_t anchor = 0;
  std::uint32_t closer = 0;
  std::uint32_t farther = 0;
  bool operator==(const TripletConstraint&) const = default;
};

// Loss summed over the batch. When `grad` is non-null it receives the exact
// subgradient (n x d); inactive hinges and coincident points contribute zero.
double soe_loss_and_grad(const Eigen::MatrixXd& x, std::span<const TripletConstraint> batch,
                         double margin, Eigen::MatrixXd* grad = nullptr);

// Draws ceil(T / |anchors|) constraints with replacement from each anchor's
// pool. Output is grouped by ascending anchor index.
std::vector<TripletConstraint> anchor_balanced_resample(
    std::span<const TripletConstraint> triplets, std::mt19937_64& rng);

// Fraction of constraints with ||x_a - x_closer|| < ||x_a - x_farther||.
double constraint_agreement(const Eigen::MatrixXd& x,
                            std::span<const TripletConstraint> constraints);

// Mean over anchors of each anchor's fraction of satisfied constraints.
double balanced_constraint_agreement(const Eigen::MatrixXd& x,
                                     std::span<const TripletConstraint> constraints);

struct TripletSplit {
  std::vector<TripletConstraint> train;
  std::vector<TripletConstraint> held_out;
};

// Per-anchor seeded split; each anchor keeps at least one training triplet.
// Both parts preserve the input order.
TripletSplit split_by_anchor(std::span<const TripletConstraint> triplets,
                             double held_out_fraction, std::uint64_t seed);

// Non-skipped judgments as constraints; Left maps to (anchor, left, right).
std::vector<TripletConstraint> constraints_from_judgments(
    std::span<const TripletJudgment> judgments, const IdIndex& index);

struct SoeResult {
  Eigen::MatrixXd coords;            // n x d
  std::vector<double> loss_history;  // mean hinge per sampled triplet, per epoch
  std::optional<double> held_out_agreement;
};

SoeResult fit_soe(std::span<const TripletConstraint> triplets, std::size_t n_items,
                  const SoeConfig& cfg,
                  std::span<const TripletConstraint> held_out = {});

}  // namespace trisim
