#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace trisim {

enum class LrSchedule { Constant, Cosine };

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW style)
  bool amsgrad = false;
};

// Adam over a flat parameter vector, with optional AMSGrad max-tracking of
// the second moment.
class Adam {
 public:
  Adam(Eigen::Index size, AdamConfig cfg = {});

  void step(Eigen::Ref<Eigen::VectorXd> params,
            const Eigen::Ref<const Eigen::VectorXd>& grad, double lr);

  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  Eigen::VectorXd v_max_;
  std::size_t t_ = 0;
};

// Learning rate at `step` of `total` steps; cosine decays from base to 0.
double scheduled_lr(LrSchedule schedule, double base, std::size_t step, std::size_t total);

}  // namespace trisim
