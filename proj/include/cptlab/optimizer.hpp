#pragma once

#include "cptlab/common.hpp"

namespace cptlab {

struct OptimizerConfig {
  enum class Kind { sgd, adam };
  Kind kind = Kind::sgd;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  int steps_per_task = 300;

  void validate() const {
    // learning_rate 0 is allowed: it is the exact null update
    if (learning_rate < 0.0)
      throw InvalidInput("optimizer: learning_rate must be >= 0");
    if (batch_size < 1) throw InvalidInput("optimizer: batch_size must be >= 1");
    if (steps_per_task < 0)
      throw InvalidInput("optimizer: steps_per_task must be >= 0");
    if (kind == Kind::adam &&
        (adam_beta1 < 0 || adam_beta1 >= 1 || adam_beta2 < 0 ||
         adam_beta2 >= 1 || adam_eps <= 0))
      throw InvalidInput("optimizer: bad adam parameters");
  }
};

/// Applies ascent steps theta <- theta + lr * precond(direction). SGD is the
/// default so parameter updates stay proportional to the raw estimator
/// gradients; Adam keeps per-coordinate moments across steps of one task.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, int dim) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.kind == OptimizerConfig::Kind::adam) {
      m_.assign(static_cast<std::size_t>(dim), 0.0);
      v_.assign(static_cast<std::size_t>(dim), 0.0);
    }
  }

  void ascend(ParamVector& theta, const ParamVector& direction) {
    if (cfg_.learning_rate == 0.0) return;
    if (cfg_.kind == OptimizerConfig::Kind::sgd) {
      axpy(cfg_.learning_rate, direction, theta);
      return;
    }
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_[i] = cfg_.adam_beta1 * m_[i] + (1.0 - cfg_.adam_beta1) * direction[i];
      v_[i] = cfg_.adam_beta2 * v_[i] +
              (1.0 - cfg_.adam_beta2) * direction[i] * direction[i];
      double mhat = m_[i] / c1;
      double vhat = v_[i] / c2;
      theta[i] += cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
    }
  }

 private:
  OptimizerConfig cfg_;
  ParamVector m_, v_;
  long t_ = 0;
};

}  // namespace cptlab
