#include "trisim/optim.hpp"

#include <cmath>
#include <numbers>

#include "trisim/errors.hpp"

namespace trisim {

Adam::Adam(Eigen::Index size, AdamConfig cfg)
    : cfg_(cfg),
      m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      v_max_(Eigen::VectorXd::Zero(size)) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw ConfigError("Adam eps must be positive");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
}

void Adam::step(Eigen::Ref<Eigen::VectorXd> params,
                const Eigen::Ref<const Eigen::VectorXd>& grad, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  if (cfg_.weight_decay > 0.0) params *= 1.0 - lr * cfg_.weight_decay;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
  const Eigen::VectorXd* second = &v_;
  if (cfg_.amsgrad) {
    v_max_ = v_max_.cwiseMax(v_);
    second = &v_max_;
  }
  const double step_size = lr / bc1;
  const double sqrt_bc2 = std::sqrt(bc2);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double denom = std::sqrt((*second)(i)) / sqrt_bc2 + cfg_.eps;
    params(i) -= step_size * m_(i) / denom;
  }
}

double scheduled_lr(LrSchedule schedule, double base, std::size_t step, std::size_t total) {
  if (schedule == LrSchedule::Constant || total == 0) return base;
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace trisim
