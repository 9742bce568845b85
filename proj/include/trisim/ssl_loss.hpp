#pragma once

// Self-supervised objectives over paired view embeddings (B x d batches):
// VICReg (default), a hardest-negative triplet hinge, and a symmetric
// normalized-temperature cross-entropy.

#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

#include "trisim/optim.hpp"
#include "trisim/pool_head.hpp"

namespace trisim {

enum class LossKind { Vicreg, Triplet, Contrastive };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind k);

struct SslConfig {
  LossKind loss = LossKind::Vicreg;
  double lambda = 25.0;  // invariance weight
  double mu = 25.0;      // variance weight
  double nu = 1.0;       // covariance weight
  double gamma = 1.0;    // target per-dimension std
  double eps_var = 1e-4;
  double eps_ln = 1e-5;
  double margin = 0.2;       // triplet
  double temperature = 0.1;  // contrastive

  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-5;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  std::uint64_t seed = 0;

  // Head architecture.
  std::size_t hidden = 128;
  std::size_t dim = 512;
  Pooling pooling = Pooling::Attention;
  std::size_t token_cap = kDefaultTokenCap;

  void validate() const;

  // Defaults for a loss kind: triplet trains with batch 8, contrastive with
  // batch 128; everything else as above.
  static SslConfig defaults_for(LossKind kind);
};

struct LossValue {
  double total = 0.0;
  // VICReg terms, unweighted; zero for the other kinds.
  double invariance = 0.0;
  double variance = 0.0;
  double covariance = 0.0;
};

LossValue ssl_loss(const Eigen::MatrixXd& f, const Eigen::MatrixXd& f_prime,
                   const SslConfig& cfg);

// Loss plus its gradient with respect to both batches.
LossValue ssl_loss_grad(const Eigen::MatrixXd& f, const Eigen::MatrixXd& f_prime,
                        const SslConfig& cfg, Eigen::MatrixXd& d_f,
                        Eigen::MatrixXd& d_f_prime);

}  // namespace trisim
