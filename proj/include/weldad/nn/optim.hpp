#pragma once

#include <cstdint>
#include <vector>

#include "weldad/nn/tensor.hpp"

namespace weldad::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter moment estimates plus the shared step counter.
struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
};

// Adam with bias correction:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Non-trainable parameters (running statistics) are skipped.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();

  const OptimizerState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  OptimizerState state_;
};

/// One-cycle learning-rate policy with cosine annealing on both phases.
/// Rises from peak/initial_divisor to peak at the warmup step, then falls
/// to peak/(initial_divisor * final_divisor) at total_steps.
class OneCycleSchedule {
 public:
  OneCycleSchedule(std::int64_t total_steps, double peak_lr,
                   double warmup_fraction = 0.3, double initial_divisor = 25.0,
                   double final_divisor = 1e4);

  /// Learning rate at step in [0, total_steps]; throws ConfigError outside.
  double lr(std::int64_t step) const;

  std::int64_t total_steps() const { return total_steps_; }
  std::int64_t warmup_step() const { return warmup_step_; }
  double peak_lr() const { return peak_lr_; }
  double initial_lr() const { return peak_lr_ / initial_divisor_; }
  double final_lr() const { return initial_lr() / final_divisor_; }

 private:
  std::int64_t total_steps_;
  std::int64_t warmup_step_;
  double peak_lr_;
  double initial_divisor_;
  double final_divisor_;
};

}  // namespace weldad::nn
