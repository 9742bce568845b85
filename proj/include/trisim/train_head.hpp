#pragma once

#include <span>
#include <vector>

#include "trisim/corpus.hpp"
#include "trisim/pool_head.hpp"
#include "trisim/ssl_loss.hpp"

namespace trisim {

// Token matrices of paired wound instances forming one training batch.
struct WoundBatch {
  std::vector<Eigen::MatrixXd> view_a;
  std::vector<Eigen::MatrixXd> view_b;
};

// Forward both views, evaluate the loss and, when `grad` is non-null,
// backpropagate into it (overwritten).
LossValue batch_loss_and_grad(const HeadParams& params, const WoundBatch& batch,
                              const SslConfig& cfg, HeadParams* grad);

struct TrainResult {
  HeadParams params;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

// Trains the pooling/predictor head on every (pair, wound) instance with
// Adam (decoupled weight decay) and the configured schedule.
TrainResult train_head(std::span<const ViewPair> pairs, const SslConfig& cfg);

// Per-dimension standard deviation (unbiased) of embedding rows.
Eigen::VectorXd per_dim_std(const Eigen::MatrixXd& rows);

}  // namespace trisim
