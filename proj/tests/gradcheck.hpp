#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "trisim/pool_head.hpp"
#include "trisim/soe.hpp"
#include "trisim/ssl_loss.hpp"
#include "trisim/train_head.hpp"

namespace testing {

// ||analytic - numeric|| / max(||analytic||, ||numeric||) using central
// differences of `loss` around `x`. Zero when both gradients vanish.
template <class Loss>
double fd_relative_error(Loss&& loss, Eigen::VectorXd x, const Eigen::VectorXd& analytic,
                         double h = 1e-6) {
  Eigen::VectorXd numeric(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = loss(x);
    x(i) = keep - h;
    const double down = loss(x);
    x(i) = keep;
    numeric(i) = (up - down) / (2.0 * h);
  }
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale < 1e-12) return 0.0;
  return (analytic - numeric).norm() / scale;
}

inline trisim::WoundBatch random_wound_batch(std::mt19937_64& rng, Eigen::Index channels,
                                             std::size_t batch) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> count(2, 6);
  auto tokens = [&] {
    Eigen::MatrixXd t(count(rng), channels);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
    return t;
  };
  trisim::WoundBatch b;
  for (std::size_t i = 0; i < batch; ++i) {
    b.view_a.push_back(tokens());
    b.view_b.push_back(tokens());
  }
  return b;
}

// Gradient check of a whole SSL loss backpropagated through the head.
inline double head_gradient_error(trisim::LossKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto cfg = trisim::SslConfig::defaults_for(kind);
  const Eigen::Index channels = 3 + static_cast<Eigen::Index>(rng() % 3);
  auto params = trisim::HeadParams::init(channels, 4, 3 + static_cast<Eigen::Index>(rng() % 3),
                                         seed);
  const auto batch = random_wound_batch(rng, channels, 3 + rng() % 3);
  trisim::HeadParams grad;
  trisim::batch_loss_and_grad(params, batch, cfg, &grad);
  auto loss = [&](const Eigen::VectorXd& flat) {
    auto p = params;
    p.unflatten(flat);
    return trisim::batch_loss_and_grad(p, batch, cfg, nullptr).total;
  };
  return fd_relative_error(loss, params.flatten(), grad.flatten());
}

inline double soe_gradient_error(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng() % 6);
  const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  std::vector<trisim::TripletConstraint> batch;
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  while (batch.size() < 40) {
    const auto a = pick(rng), c = pick(rng), f = pick(rng);
    if (a == c || a == f || c == f) continue;
    batch.push_back({a, c, f});
  }
  const double margin = 0.5;
  Eigen::MatrixXd grad;
  trisim::soe_loss_and_grad(x, batch, margin, &grad);
  auto loss = [&](const Eigen::VectorXd& flat) {
    const Eigen::MatrixXd y = Eigen::Map<const Eigen::MatrixXd>(flat.data(), n, d);
    return trisim::soe_loss_and_grad(y, batch, margin);
  };
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size());
  return fd_relative_error(loss, flat, analytic);
}

}  // namespace testing
