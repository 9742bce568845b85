#include "trisim/pool_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trisim/errors.hpp"
#include "trisim/seeding.hpp"

namespace trisim {

Pooling parse_pooling(std::string_view name) {
  if (name == "attention") return Pooling::Attention;
  if (name == "mean") return Pooling::Mean;
  throw ConfigError("unknown pooling '" + std::string(name) +
                    "' (expected attention or mean)");
}

std::string_view to_string(Pooling p) {
  return p == Pooling::Attention ? "attention" : "mean";
}

void HeadParams::validate() const {
  const auto c = channels();
  const auto h = hidden();
  const auto d = dim();
  if (c < 1 || h < 1 || d < 1) throw DataError("head params: empty tensor shapes");
  if (attn_b1.size() != h || attn_w2.size() != h || pred_w.rows() != c ||
      pred_b.size() != d || ln_gain.size() != d || ln_bias.size() != d) {
    throw DataError("head params: inconsistent tensor shapes");
  }
  if (!attn_w1.allFinite() || !attn_b1.allFinite() || !attn_w2.allFinite() ||
      !std::isfinite(attn_b2) || !pred_w.allFinite() || !pred_b.allFinite() ||
      !ln_gain.allFinite() || !ln_bias.allFinite()) {
    throw DataError("head params: non-finite entry");
  }
  if (!(ln_eps > 0.0)) {
    throw ConfigError("layer-norm epsilon must be positive (division hazard at d = 1 "
                      "or constant activations)");
  }
}

HeadParams HeadParams::init(Eigen::Index channels, Eigen::Index hidden, Eigen::Index dim,
                            std::uint64_t seed) {
  if (channels < 1 || hidden < 1 || dim < 1) {
    throw ConfigError("head shape: channels, hidden and dim must be >= 1");
  }
  std::mt19937_64 rng(derive_seed(seed, "head-init"));
  auto fill = [&](auto& m, double fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  HeadParams p;
  p.attn_w1.resize(channels, hidden);
  p.attn_b1.resize(hidden);
  p.attn_w2.resize(hidden);
  p.pred_w.resize(channels, dim);
  p.pred_b.resize(dim);
  fill(p.attn_w1, static_cast<double>(channels));
  fill(p.attn_b1, static_cast<double>(channels));
  fill(p.attn_w2, static_cast<double>(hidden));
  {
    Eigen::VectorXd b2(1);
    fill(b2, static_cast<double>(hidden));
    p.attn_b2 = b2(0);
  }
  fill(p.pred_w, static_cast<double>(channels));
  fill(p.pred_b, static_cast<double>(channels));
  p.ln_gain = Eigen::VectorXd::Ones(dim);
  p.ln_bias = Eigen::VectorXd::Zero(dim);
  return p;
}

HeadParams HeadParams::zeros_like() const {
  HeadParams g;
  g.attn_w1 = Eigen::MatrixXd::Zero(attn_w1.rows(), attn_w1.cols());
  g.attn_b1 = Eigen::VectorXd::Zero(attn_b1.size());
  g.attn_w2 = Eigen::VectorXd::Zero(attn_w2.size());
  g.attn_b2 = 0.0;
  g.pred_w = Eigen::MatrixXd::Zero(pred_w.rows(), pred_w.cols());
  g.pred_b = Eigen::VectorXd::Zero(pred_b.size());
  g.ln_gain = Eigen::VectorXd::Zero(ln_gain.size());
  g.ln_bias = Eigen::VectorXd::Zero(ln_bias.size());
  g.pooling = pooling;
  g.ln_eps = ln_eps;
  return g;
}

Eigen::Index HeadParams::parameter_count() const {
  return attn_w1.size() + attn_b1.size() + attn_w2.size() + 1 + pred_w.size() +
         pred_b.size() + ln_gain.size() + ln_bias.size();
}

Eigen::VectorXd HeadParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index off = 0;
  auto put = [&](const auto& m) {
    flat.segment(off, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
    off += m.size();
  };
  put(attn_w1);
  put(attn_b1);
  put(attn_w2);
  flat(off++) = attn_b2;
  put(pred_w);
  put(pred_b);
  put(ln_gain);
  put(ln_bias);
  return flat;
}

void HeadParams::unflatten(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != parameter_count()) {
    throw DataError("head params: flat vector has wrong length");
  }
  Eigen::Index off = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(off, m.size());
    off += m.size();
  };
  take(attn_w1);
  take(attn_b1);
  take(attn_w2);
  attn_b2 = flat(off++);
  take(pred_w);
  take(pred_b);
  take(ln_gain);
  take(ln_bias);
}

TokenSet sample_wound_tokens(const FeatureContainer& fc, std::string_view wound_id,
                             std::optional<std::size_t> cap, std::uint64_t seed) {
  const WoundMask* mask = fc.find_wound(wound_id);
  if (mask == nullptr) {
    throw DataError("container '" + fc.item + "' has no wound '" +
                    std::string(wound_id) + "'");
  }
  if (cap && *cap == 0) throw ConfigError("token cap must be positive");
  std::vector<std::size_t> cells;
  for (std::size_t p = 0; p < mask->cells.size(); ++p) {
    if (mask->cells[p]) cells.push_back(p);
  }
  if (cells.empty()) {
    throw DataError("container '" + fc.item + "', wound '" + mask->id + "': empty mask");
  }
  if (cap && cells.size() > *cap) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < *cap; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, cells.size() - 1);
      std::swap(cells[i], cells[pick(rng)]);
    }
    cells.resize(*cap);
    std::sort(cells.begin(), cells.end());
  }
  const std::size_t plane = static_cast<std::size_t>(fc.height) * fc.width;
  TokenSet t;
  t.item = fc.item;
  t.wound = mask->id;
  t.tokens.resize(static_cast<Eigen::Index>(cells.size()), fc.channels);
  for (std::size_t n = 0; n < cells.size(); ++n) {
    for (std::uint32_t c = 0; c < fc.channels; ++c) {
      t.tokens(static_cast<Eigen::Index>(n), c) = fc.values[c * plane + cells[n]];
    }
  }
  return t;
}

namespace {

void check_tokens(const Eigen::MatrixXd& tokens, const HeadParams& p) {
  if (tokens.rows() < 1) throw DataError("token set is empty");
  if (tokens.cols() != p.channels()) {
    throw DataError("token width " + std::to_string(tokens.cols()) +
                    " does not match attention input width " +
                    std::to_string(p.channels()));
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - top).exp().matrix();
  return w / w.sum();
}

// Sequential column mean, so Mean pooling is reproducible bit for bit.
Eigen::VectorXd token_mean(const Eigen::MatrixXd& tokens) {
  Eigen::VectorXd out(tokens.cols());
  for (Eigen::Index c = 0; c < tokens.cols(); ++c) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < tokens.rows(); ++n) s += tokens(n, c);
    out(c) = s / static_cast<double>(tokens.rows());
  }
  return out;
}

}  // namespace

Eigen::VectorXd attention_weights(const Eigen::MatrixXd& tokens, const HeadParams& p) {
  check_tokens(tokens, p);
  const auto n = tokens.rows();
  if (p.pooling == Pooling::Mean) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  const Eigen::MatrixXd hidden =
      ((tokens * p.attn_w1).rowwise() + p.attn_b1.transpose()).array().tanh().matrix();
  const Eigen::VectorXd logits = (hidden * p.attn_w2).array() + p.attn_b2;
  return softmax(logits);
}

Eigen::VectorXd attention_pool(const Eigen::MatrixXd& tokens, const HeadParams& p) {
  check_tokens(tokens, p);
  if (p.pooling == Pooling::Mean) return token_mean(tokens);
  return tokens.transpose() * attention_weights(tokens, p);
}

Eigen::VectorXd attention_pool(const TokenSet& t, const HeadParams& p) {
  return attention_pool(t.tokens, p);
}

Eigen::VectorXd forward_embed(const Eigen::VectorXd& pooled, const HeadParams& p) {
  if (pooled.size() != p.pred_w.rows()) {
    throw DataError("pooled width " + std::to_string(pooled.size()) +
                    " does not match predictor input " + std::to_string(p.pred_w.rows()));
  }
  if (!(p.ln_eps > 0.0)) throw ConfigError("layer-norm epsilon must be positive");
  const Eigen::VectorXd z = p.pred_w.transpose() * pooled + p.pred_b;
  const double mean = z.mean();
  const Eigen::VectorXd centered = z.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(z.size());
  const double inv_std = 1.0 / std::sqrt(var + p.ln_eps);
  return p.ln_gain.cwiseProduct(centered * inv_std) + p.ln_bias;
}

WoundTrace forward_wound(Eigen::MatrixXd tokens, const HeadParams& p) {
  check_tokens(tokens, p);
  WoundTrace tr;
  tr.tokens = std::move(tokens);
  const auto n = tr.tokens.rows();
  if (p.pooling == Pooling::Attention) {
    tr.hidden = ((tr.tokens * p.attn_w1).rowwise() + p.attn_b1.transpose())
                    .array()
                    .tanh()
                    .matrix();
    const Eigen::VectorXd logits = (tr.hidden * p.attn_w2).array() + p.attn_b2;
    tr.weights = softmax(logits);
    tr.pooled = tr.tokens.transpose() * tr.weights;
  } else {
    tr.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    tr.pooled = token_mean(tr.tokens);
  }
  const Eigen::VectorXd z = p.pred_w.transpose() * tr.pooled + p.pred_b;
  const double mean = z.mean();
  const Eigen::VectorXd centered = z.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(z.size());
  tr.inv_std = 1.0 / std::sqrt(var + p.ln_eps);
  tr.xhat = centered * tr.inv_std;
  tr.output = p.ln_gain.cwiseProduct(tr.xhat) + p.ln_bias;
  return tr;
}

void backward_wound(const WoundTrace& tr, const HeadParams& p,
                    const Eigen::VectorXd& d_output, HeadParams& grad) {
  // Layer norm.
  grad.ln_gain += d_output.cwiseProduct(tr.xhat);
  grad.ln_bias += d_output;
  const Eigen::VectorXd d_xhat = d_output.cwiseProduct(p.ln_gain);
  const double mean_dx = d_xhat.mean();
  const double mean_dx_xhat = d_xhat.dot(tr.xhat) / static_cast<double>(d_xhat.size());
  const Eigen::VectorXd d_z =
      tr.inv_std * (d_xhat.array() - mean_dx - tr.xhat.array() * mean_dx_xhat).matrix();

  // Linear predictor.
  grad.pred_w.noalias() += tr.pooled * d_z.transpose();
  grad.pred_b += d_z;
  if (p.pooling == Pooling::Mean) return;
  const Eigen::VectorXd d_pooled = p.pred_w * d_z;

  // Weighted sum and softmax.
  const Eigen::VectorXd d_weights = tr.tokens * d_pooled;
  const double inner = tr.weights.dot(d_weights);
  const Eigen::VectorXd d_logits =
      tr.weights.cwiseProduct((d_weights.array() - inner).matrix());

  // Attention MLP.
  grad.attn_w2.noalias() += tr.hidden.transpose() * d_logits;
  grad.attn_b2 += d_logits.sum();
  const Eigen::MatrixXd d_pre =
      ((d_logits * p.attn_w2.transpose()).array() * (1.0 - tr.hidden.array().square()))
          .matrix();
  grad.attn_w1.noalias() += tr.tokens.transpose() * d_pre;
  grad.attn_b1 += d_pre.colwise().sum().transpose();
}

Eigen::VectorXd embed_image(const FeatureContainer& fc, const HeadParams& p,
                            std::optional<std::size_t> cap, std::uint64_t seed) {
  if (fc.wounds.empty()) throw DataError("container '" + fc.item + "' has no wounds");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.dim());
  for (const auto& w : fc.wounds) {
    const auto tokens = sample_wound_tokens(fc, w.id, cap, seed);
    sum += forward_embed(attention_pool(tokens, p), p);
  }
  return sum / static_cast<double>(fc.wounds.size());
}

}  // namespace trisim
