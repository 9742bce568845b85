#pragma once

// Wound-level attention pooling head: tokens sampled from a wound mask are
// scored by a Linear(C->h) -> tanh -> Linear(h->1) MLP, softmax-normalized,
// pooled, then projected by a linear predictor followed by layer norm.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "trisim/corpus.hpp"

namespace trisim {

enum class Pooling { Attention, Mean };

Pooling parse_pooling(std::string_view name);
std::string_view to_string(Pooling p);

inline constexpr std::size_t kDefaultTokenCap = 1024;

struct HeadParams {
  Eigen::MatrixXd attn_w1;  // C x h
  Eigen::VectorXd attn_b1;  // h
  Eigen::VectorXd attn_w2;  // h
  double attn_b2 = 0.0;
  Eigen::MatrixXd pred_w;   // C x d
  Eigen::VectorXd pred_b;   // d
  Eigen::VectorXd ln_gain;  // d
  Eigen::VectorXd ln_bias;  // d

  // Not trained.
  Pooling pooling = Pooling::Attention;
  double ln_eps = 1e-5;

  Eigen::Index channels() const { return attn_w1.rows(); }
  Eigen::Index hidden() const { return attn_w1.cols(); }
  Eigen::Index dim() const { return pred_w.cols(); }

  void validate() const;

  // Uniform in +-sqrt(1/fan_in) per layer; ln_gain = 1, ln_bias = 0.
  static HeadParams init(Eigen::Index channels, Eigen::Index hidden, Eigen::Index dim,
                         std::uint64_t seed);
  // Same shapes and settings, all trainable entries zero.
  HeadParams zeros_like() const;

  Eigen::Index parameter_count() const;
  // Order: attn_w1 (col-major), attn_b1, attn_w2, attn_b2, pred_w, pred_b,
  // ln_gain, ln_bias.
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat);
};

struct TokenSet {
  Eigen::MatrixXd tokens;  // N x C
  ItemId item;
  std::string wound;
};

// One token per mask cell in row-major scan order. With `cap` set and more
// cells than cap, a seeded uniform subsample without replacement (kept in
// scan order).
TokenSet sample_wound_tokens(const FeatureContainer& fc, std::string_view wound_id,
                             std::optional<std::size_t> cap = std::nullopt,
                             std::uint64_t seed = 0);

// Softmax attention weights over the tokens (uniform 1/N under Mean pooling).
Eigen::VectorXd attention_weights(const Eigen::MatrixXd& tokens, const HeadParams& p);
Eigen::VectorXd attention_pool(const TokenSet& t, const HeadParams& p);
Eigen::VectorXd attention_pool(const Eigen::MatrixXd& tokens, const HeadParams& p);

Eigen::VectorXd forward_embed(const Eigen::VectorXd& pooled, const HeadParams& p);

// Intermediate values of one wound's forward pass, kept for backprop.
struct WoundTrace {
  Eigen::MatrixXd tokens;   // N x C
  Eigen::MatrixXd hidden;   // N x h, tanh activations
  Eigen::VectorXd weights;  // N
  Eigen::VectorXd pooled;   // C
  Eigen::VectorXd xhat;     // d, normalized pre-affine activations
  double inv_std = 0.0;
  Eigen::VectorXd output;   // d
};

WoundTrace forward_wound(Eigen::MatrixXd tokens, const HeadParams& p);

// Accumulates dLoss/dParams into `grad` given dLoss/dOutput.
void backward_wound(const WoundTrace& trace, const HeadParams& p,
                    const Eigen::VectorXd& d_output, HeadParams& grad);

// Mean of the per-wound embeddings of an image.
Eigen::VectorXd embed_image(const FeatureContainer& fc, const HeadParams& p,
                            std::optional<std::size_t> cap = kDefaultTokenCap,
                            std::uint64_t seed = 0);

}  // namespace trisim
