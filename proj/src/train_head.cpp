#include "trisim/train_head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "trisim/errors.hpp"
#include "trisim/optim.hpp"

namespace trisim {

LossValue batch_loss_and_grad(const HeadParams& params, const WoundBatch& batch,
                              const SslConfig& cfg, HeadParams* grad) {
  const auto b = static_cast<Eigen::Index>(batch.view_a.size());
  if (batch.view_b.size() != batch.view_a.size()) {
    throw DataError("wound batch: view counts differ");
  }
  std::vector<WoundTrace> traces_a;
  std::vector<WoundTrace> traces_b;
  traces_a.reserve(batch.view_a.size());
  traces_b.reserve(batch.view_b.size());
  Eigen::MatrixXd f(b, params.dim());
  Eigen::MatrixXd fp(b, params.dim());
  for (Eigen::Index i = 0; i < b; ++i) {
    traces_a.push_back(forward_wound(batch.view_a[i], params));
    traces_b.push_back(forward_wound(batch.view_b[i], params));
    f.row(i) = traces_a.back().output.transpose();
    fp.row(i) = traces_b.back().output.transpose();
  }
  if (grad == nullptr) return ssl_loss(f, fp, cfg);

  Eigen::MatrixXd df;
  Eigen::MatrixXd dfp;
  const LossValue loss = ssl_loss_grad(f, fp, cfg, df, dfp);
  *grad = params.zeros_like();
  // Fixed accumulation order keeps seeded runs bit-reproducible.
  for (Eigen::Index i = 0; i < b; ++i) {
    backward_wound(traces_a[i], params, df.row(i).transpose(), *grad);
    backward_wound(traces_b[i], params, dfp.row(i).transpose(), *grad);
  }
  return loss;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                       std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(c)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (std::uint64_t{words[0]} << 32) | words[1];
}

struct Instance {
  std::size_t pair;
  std::size_t wound;
};

}  // namespace

TrainResult train_head(std::span<const ViewPair> pairs, const SslConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train_head: no view pairs");
  const auto channels = pairs.front().view_a.channels;
  std::vector<Instance> instances;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pairs[i].validate();
    if (pairs[i].view_a.channels != channels) {
      throw DataError("train_head: pair '" + pairs[i].item + "' has " +
                      std::to_string(pairs[i].view_a.channels) + " channels, expected " +
                      std::to_string(channels));
    }
    for (std::size_t w = 0; w < pairs[i].view_a.wounds.size(); ++w) {
      instances.push_back({i, w});
    }
  }
  if (instances.size() < 2) {
    throw DataError("train_head: need at least 2 wound instances, got " +
                    std::to_string(instances.size()));
  }

  TrainResult result;
  result.params = HeadParams::init(channels, static_cast<Eigen::Index>(cfg.hidden),
                                   static_cast<Eigen::Index>(cfg.dim), cfg.seed);
  result.params.pooling = cfg.pooling;
  result.params.ln_eps = cfg.eps_ln;

  const std::size_t bs = std::min(cfg.batch_size, instances.size());
  std::size_t batches_per_epoch = instances.size() / bs;
  if (instances.size() % bs >= 2) ++batches_per_epoch;
  const std::size_t total_steps = batches_per_epoch * cfg.epochs;

  AdamConfig adam_cfg;
  adam_cfg.weight_decay = cfg.weight_decay;
  Adam adam(result.params.parameter_count(), adam_cfg);
  Eigen::VectorXd flat = result.params.flatten();

  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xB47C, 0, 0));
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(start + bs, order.size());
      // Fold a trailing singleton into this batch; the losses need B >= 2.
      if (order.size() - end < 2) end = order.size();

      WoundBatch batch;
      for (std::size_t k = start; k < end; ++k) {
        const auto& inst = instances[order[k]];
        const auto& pair = pairs[inst.pair];
        const auto& wound_id = pair.view_a.wounds[inst.wound].id;
        batch.view_a.push_back(
            sample_wound_tokens(pair.view_a, wound_id, cfg.token_cap,
                                mix_seed(cfg.seed, epoch, order[k], 0))
                .tokens);
        batch.view_b.push_back(
            sample_wound_tokens(pair.view_b, wound_id, cfg.token_cap,
                                mix_seed(cfg.seed, epoch, order[k], 1))
                .tokens);
      }

      HeadParams grad;
      const LossValue loss = batch_loss_and_grad(result.params, batch, cfg, &grad);
      if (!std::isfinite(loss.total)) {
        throw DataError("train_head: non-finite loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(epoch_batches));
      }
      const double lr = scheduled_lr(cfg.lr_schedule, cfg.learning_rate, step, total_steps);
      adam.step(flat, grad.flatten(), lr);
      result.params.unflatten(flat);

      epoch_loss += loss.total;
      ++epoch_batches;
      ++step;
      start = end;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_batches));
  }
  return result;
}

Eigen::VectorXd per_dim_std(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw DataError("per_dim_std: need at least 2 rows");
  const Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
  return (centered.colwise().squaredNorm() / static_cast<double>(rows.rows() - 1))
      .array()
      .sqrt()
      .transpose();
}

}  // namespace trisim
