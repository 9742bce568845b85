#include "trisim/ssl_loss.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "trisim/errors.hpp"

namespace trisim {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "vicreg") return LossKind::Vicreg;
  if (name == "triplet") return LossKind::Triplet;
  if (name == "contrastive") return LossKind::Contrastive;
  throw ConfigError("unknown loss '" + std::string(name) +
                    "' (expected vicreg, triplet or contrastive)");
}

std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::Vicreg: return "vicreg";
    case LossKind::Triplet: return "triplet";
    case LossKind::Contrastive: return "contrastive";
  }
  return "vicreg";
}

void SslConfig::validate() const {
  if (!(lambda >= 0.0 && mu >= 0.0 && nu >= 0.0)) {
    throw ConfigError("VICReg weights must be nonnegative");
  }
  if (!(gamma > 0.0)) throw ConfigError("variance target gamma must be positive");
  if (!(eps_var > 0.0)) throw ConfigError("eps_var must be positive");
  if (!(eps_ln > 0.0)) {
    throw ConfigError("eps_ln must be positive (layer norm divides by sqrt(var + eps_ln))");
  }
  if (!(margin > 0.0)) throw ConfigError("triplet margin must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (hidden == 0 || dim == 0) throw ConfigError("hidden and dim must be positive");
  if (token_cap == 0) throw ConfigError("token cap must be positive");
}

SslConfig SslConfig::defaults_for(LossKind kind) {
  SslConfig cfg;
  cfg.loss = kind;
  if (kind == LossKind::Triplet) cfg.batch_size = 8;
  if (kind == LossKind::Contrastive) cfg.batch_size = 128;
  return cfg;
}

namespace {

constexpr double kDistEps = 1e-12;

LossValue vicreg(const Eigen::MatrixXd& f, const Eigen::MatrixXd& fp,
                 const SslConfig& cfg, Eigen::MatrixXd* df, Eigen::MatrixXd* dfp) {
  const auto b = static_cast<double>(f.rows());
  const auto d = static_cast<double>(f.cols());
  LossValue out;

  const Eigen::MatrixXd diff = f - fp;
  out.invariance = diff.squaredNorm() / (b * d);
  if (df) {
    *df = (2.0 * cfg.lambda / (b * d)) * diff;
    *dfp = -*df;
  }

  auto branch = [&](const Eigen::MatrixXd& z, Eigen::MatrixXd* dz) {
    const Eigen::MatrixXd zc = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = (zc.transpose() * zc) / (b - 1.0);
    double v = 0.0;
    Eigen::VectorXd v_coef = Eigen::VectorXd::Zero(z.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double sd = std::sqrt(cov(j, j) + cfg.eps_var);
      if (cfg.gamma - sd > 0.0) {
        v += cfg.gamma - sd;
        v_coef(j) = -0.5 / (d * sd * (b - 1.0));
      }
    }
    v /= d;
    Eigen::MatrixXd off = cov;
    off.diagonal().setZero();
    const double c = off.squaredNorm() / d;
    if (dz) {
      *dz += cfg.mu * (zc * v_coef.asDiagonal());
      *dz += cfg.nu * (zc * ((2.0 / d) * off)) / (b - 1.0);
    }
    return std::pair{v, c};
  };
  const auto [v1, c1] = branch(f, df);
  const auto [v2, c2] = branch(fp, dfp);
  out.variance = 0.5 * (v1 + v2);
  out.covariance = 0.5 * (c1 + c2);
  out.total = cfg.lambda * out.invariance + cfg.mu * out.variance + cfg.nu * out.covariance;
  return out;
}

LossValue triplet(const Eigen::MatrixXd& f, const Eigen::MatrixXd& fp,
                  const SslConfig& cfg, Eigen::MatrixXd* df, Eigen::MatrixXd* dfp) {
  const auto b = f.rows();
  if (df) {
    df->setZero(f.rows(), f.cols());
    dfp->setZero(fp.rows(), fp.cols());
  }
  auto dist = [&](Eigen::Index i, Eigen::Index k) {
    return std::sqrt((f.row(i) - fp.row(k)).squaredNorm() + kDistEps);
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    Eigen::Index hardest = -1;
    double d_neg = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < b; ++k) {
      if (k == i) continue;
      const double dk = dist(i, k);
      if (dk < d_neg) {
        d_neg = dk;
        hardest = k;
      }
    }
    const double d_pos = dist(i, i);
    const double hinge = d_pos - d_neg + cfg.margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    if (df) {
      const Eigen::RowVectorXd g_pos = (f.row(i) - fp.row(i)) / (d_pos * b);
      const Eigen::RowVectorXd g_neg = (f.row(i) - fp.row(hardest)) / (d_neg * b);
      df->row(i) += g_pos - g_neg;
      dfp->row(i) -= g_pos;
      dfp->row(hardest) += g_neg;
    }
  }
  LossValue out;
  out.total = total / static_cast<double>(b);
  return out;
}

LossValue contrastive(const Eigen::MatrixXd& f, const Eigen::MatrixXd& fp,
                      const SslConfig& cfg, Eigen::MatrixXd* df, Eigen::MatrixXd* dfp) {
  const auto b = f.rows();
  const Eigen::VectorXd nf = f.rowwise().norm();
  const Eigen::VectorXd nfp = fp.rowwise().norm();
  if (nf.minCoeff() == 0.0 || nfp.minCoeff() == 0.0) {
    throw DataError("contrastive loss: zero-norm embedding in batch");
  }
  const Eigen::MatrixXd z = nf.cwiseInverse().asDiagonal() * f;
  const Eigen::MatrixXd u = nfp.cwiseInverse().asDiagonal() * fp;
  const Eigen::MatrixXd logits = (z * u.transpose()) / cfg.temperature;

  Eigen::MatrixXd p_row(b, b);
  Eigen::MatrixXd p_col(b, b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double mr = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd er = (logits.row(i).array() - mr).exp().matrix();
    const double sr = er.sum();
    p_row.row(i) = er / sr;
    total += -(logits(i, i) - mr - std::log(sr));

    const double mc = logits.col(i).maxCoeff();
    const Eigen::VectorXd ec = (logits.col(i).array() - mc).exp().matrix();
    const double sc = ec.sum();
    p_col.col(i) = ec / sc;
    total += -(logits(i, i) - mc - std::log(sc));
  }
  LossValue out;
  out.total = total / (2.0 * static_cast<double>(b));
  if (df) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(b, b);
    const Eigen::MatrixXd d_logits =
        ((p_row - eye) + (p_col - eye)) / (2.0 * static_cast<double>(b));
    const Eigen::MatrixXd dz = d_logits * u / cfg.temperature;
    const Eigen::MatrixXd du = d_logits.transpose() * z / cfg.temperature;
    df->resize(f.rows(), f.cols());
    dfp->resize(fp.rows(), fp.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      df->row(i) = (dz.row(i) - z.row(i) * z.row(i).dot(dz.row(i))) / nf(i);
      dfp->row(i) = (du.row(i) - u.row(i) * u.row(i).dot(du.row(i))) / nfp(i);
    }
  }
  return out;
}

LossValue dispatch(const Eigen::MatrixXd& f, const Eigen::MatrixXd& fp,
                   const SslConfig& cfg, Eigen::MatrixXd* df, Eigen::MatrixXd* dfp) {
  if (f.rows() != fp.rows() || f.cols() != fp.cols()) {
    throw DataError("ssl loss: view batches have different shapes");
  }
  if (f.rows() < 2) {
    throw DataError("ssl loss: batch size must be >= 2, got " + std::to_string(f.rows()));
  }
  switch (cfg.loss) {
    case LossKind::Vicreg: return vicreg(f, fp, cfg, df, dfp);
    case LossKind::Triplet: return triplet(f, fp, cfg, df, dfp);
    case LossKind::Contrastive: return contrastive(f, fp, cfg, df, dfp);
  }
  return {};
}

}  // namespace

LossValue ssl_loss(const Eigen::MatrixXd& f, const Eigen::MatrixXd& f_prime,
                   const SslConfig& cfg) {
  return dispatch(f, f_prime, cfg, nullptr, nullptr);
}

LossValue ssl_loss_grad(const Eigen::MatrixXd& f, const Eigen::MatrixXd& f_prime,
                        const SslConfig& cfg, Eigen::MatrixXd& d_f,
                        Eigen::MatrixXd& d_f_prime) {
  return dispatch(f, f_prime, cfg, &d_f, &d_f_prime);
}

}  // namespace trisim
