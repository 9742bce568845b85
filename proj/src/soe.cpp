#include "trisim/soe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "trisim/errors.hpp"
#include "trisim/seeding.hpp"
#include "trisim/optim.hpp"

namespace trisim {

namespace {
constexpr double kNormEps = 1e-12;
}

void SoeConfig::validate() const {
  if (dim == 0) throw ConfigError("soe: dim must be >= 1");
  if (!(margin >= 0.0)) throw ConfigError("soe: margin must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("soe: learning rate must be > 0");
  if (batch_size == 0) throw ConfigError("soe: batch size must be >= 1");
  if (epochs == 0) throw ConfigError("soe: epochs must be >= 1");
  if (!(init_sd > 0.0)) throw ConfigError("soe: init_sd must be > 0");
}

double soe_loss_and_grad(const Eigen::MatrixXd& x, std::span<const TripletConstraint> batch,
                         double margin, Eigen::MatrixXd* grad) {
  const auto n = static_cast<std::uint32_t>(x.rows());
  const auto d = x.cols();
  if (grad) grad->setZero(x.rows(), d);
  double loss = 0.0;
  Eigen::VectorXd dij(d);
  Eigen::VectorXd dik(d);
  for (const auto& t : batch) {
    if (t.anchor >= n || t.closer >= n || t.farther >= n) {
      throw DataError("soe: triplet index out of range (" + std::to_string(t.anchor) + ", " +
                      std::to_string(t.closer) + ", " + std::to_string(t.farther) +
                      ") for " + std::to_string(n) + " items");
    }
    double sq_j = 0.0;
    double sq_k = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      dij(c) = x(t.anchor, c) - x(t.closer, c);
      dik(c) = x(t.anchor, c) - x(t.farther, c);
      sq_j += dij(c) * dij(c);
      sq_k += dik(c) * dik(c);
    }
    const double norm_j = std::sqrt(sq_j);
    const double norm_k = std::sqrt(sq_k);
    const double hinge = margin + norm_j - norm_k;
    if (hinge <= 0.0) continue;
    loss += hinge;
    if (!grad) continue;
    const double inv_j = sq_j > 0.0 ? 1.0 / std::sqrt(sq_j + kNormEps) : 0.0;
    const double inv_k = sq_k > 0.0 ? 1.0 / std::sqrt(sq_k + kNormEps) : 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double gj = dij(c) * inv_j;
      const double gk = dik(c) * inv_k;
      (*grad)(t.anchor, c) += gj - gk;
      (*grad)(t.closer, c) -= gj;
      (*grad)(t.farther, c) += gk;
    }
  }
  return loss;
}

std::vector<TripletConstraint> anchor_balanced_resample(
    std::span<const TripletConstraint> triplets, std::mt19937_64& rng) {
  if (triplets.empty()) throw DataError("anchor-balanced resampling needs >= 1 triplet");
  std::map<std::uint32_t, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < triplets.size(); ++i) pools[triplets[i].anchor].push_back(i);
  const std::size_t per_anchor = (triplets.size() + pools.size() - 1) / pools.size();
  std::vector<TripletConstraint> out;
  out.reserve(per_anchor * pools.size());
  for (const auto& [anchor, pool] : pools) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t q = 0; q < per_anchor; ++q) out.push_back(triplets[pool[pick(rng)]]);
  }
  return out;
}

double constraint_agreement(const Eigen::MatrixXd& x,
                            std::span<const TripletConstraint> constraints) {
  if (constraints.empty()) throw DataError("agreement of an empty constraint set");
  std::size_t correct = 0;
  for (const auto& t : constraints) {
    const double dj = (x.row(t.anchor) - x.row(t.closer)).squaredNorm();
    const double dk = (x.row(t.anchor) - x.row(t.farther)).squaredNorm();
    if (dj < dk) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(constraints.size());
}

double balanced_constraint_agreement(const Eigen::MatrixXd& x,
                                     std::span<const TripletConstraint> constraints) {
  if (constraints.empty()) throw DataError("agreement of an empty constraint set");
  std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> per_anchor;
  for (const auto& t : constraints) {
    const double dj = (x.row(t.anchor) - x.row(t.closer)).squaredNorm();
    const double dk = (x.row(t.anchor) - x.row(t.farther)).squaredNorm();
    auto& [hit, total] = per_anchor[t.anchor];
    hit += dj < dk ? 1 : 0;
    ++total;
  }
  double sum = 0.0;
  for (const auto& [anchor, c] : per_anchor) {
    sum += static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return sum / static_cast<double>(per_anchor.size());
}

TripletSplit split_by_anchor(std::span<const TripletConstraint> triplets,
                             double held_out_fraction, std::uint64_t seed) {
  if (!(held_out_fraction >= 0.0 && held_out_fraction < 1.0)) {
    throw ConfigError("held-out fraction must lie in [0, 1)");
  }
  std::map<std::uint32_t, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < triplets.size(); ++i) pools[triplets[i].anchor].push_back(i);
  std::mt19937_64 rng(derive_seed(seed, "soe-split"));
  std::vector<std::uint8_t> is_test(triplets.size(), 0);
  for (auto& [anchor, pool] : pools) {
    std::shuffle(pool.begin(), pool.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::floor(held_out_fraction * static_cast<double>(pool.size()) + 0.5));
    n_test = std::min(n_test, pool.size() - 1);
    for (std::size_t k = 0; k < n_test; ++k) is_test[pool[k]] = 1;
  }
  TripletSplit split;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    (is_test[i] ? split.held_out : split.train).push_back(triplets[i]);
  }
  return split;
}

std::vector<TripletConstraint> constraints_from_judgments(
    std::span<const TripletJudgment> judgments, const IdIndex& index) {
  auto lookup = [&](const ItemId& id) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("judgment references unknown item '" + id + "'");
    return static_cast<std::uint32_t>(it->second);
  };
  std::vector<TripletConstraint> out;
  out.reserve(judgments.size());
  for (const auto& j : judgments) {
    if (j.choice == Choice::Skipped) continue;
    const auto a = lookup(j.anchor);
    const auto l = lookup(j.left);
    const auto r = lookup(j.right);
    out.push_back(j.choice == Choice::Left ? TripletConstraint{a, l, r}
                                           : TripletConstraint{a, r, l});
  }
  return out;
}

SoeResult fit_soe(std::span<const TripletConstraint> triplets, std::size_t n_items,
                  const SoeConfig& cfg, std::span<const TripletConstraint> held_out) {
  cfg.validate();
  if (n_items < 3) throw DataError("soe: need at least 3 items");
  if (triplets.empty()) throw DataError("soe: no triplets to fit");
  for (auto span : {triplets, held_out}) {
    for (const auto& t : span) {
      if (t.anchor >= n_items || t.closer >= n_items || t.farther >= n_items) {
        throw DataError("soe: triplet index out of range for " + std::to_string(n_items) +
                        " items");
      }
      if (t.anchor == t.closer || t.anchor == t.farther || t.closer == t.farther) {
        throw DataError("soe: triplet indices must be pairwise distinct");
      }
    }
  }

  std::mt19937_64 rng(derive_seed(cfg.seed, "soe-fit"));
  std::normal_distribution<double> normal(0.0, cfg.init_sd);
  SoeResult result;
  const auto n = static_cast<Eigen::Index>(n_items);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  result.coords.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) result.coords(i, k) = normal(rng);
  }

  AdamConfig adam_cfg;
  adam_cfg.amsgrad = cfg.amsgrad;
  Adam adam(n * d, adam_cfg);
  Eigen::MatrixXd grad(n, d);
  std::vector<TripletConstraint> epoch_sample;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.anchor_balanced) {
      epoch_sample = anchor_balanced_resample(triplets, rng);
    } else {
      epoch_sample.assign(triplets.begin(), triplets.end());
    }
    std::shuffle(epoch_sample.begin(), epoch_sample.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < epoch_sample.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, epoch_sample.size() - start);
      const std::span<const TripletConstraint> batch(epoch_sample.data() + start, len);
      const double loss = soe_loss_and_grad(result.coords, batch, cfg.margin, &grad);
      if (!std::isfinite(loss)) {
        throw DataError("soe: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;
      grad /= static_cast<double>(len);
      Eigen::Map<Eigen::VectorXd> flat(result.coords.data(), result.coords.size());
      adam.step(flat, Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size()),
                cfg.learning_rate);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(epoch_sample.size()));
  }
  if (!held_out.empty()) result.held_out_agreement = constraint_agreement(result.coords, held_out);
  return result;
}

}  // namespace trisim
