#include "weldad/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "weldad/error.hpp"

namespace weldad::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.eps > 0.0)) {
    throw ConfigError("Adam: betas must lie in [0, 1) and eps must be positive");
  }
  state_.first_moment.reserve(params_.size());
  state_.second_moment.reserve(params_.size());
  for (const Parameter* p : params_) {
    state_.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    state_.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double lr) {
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bias1 = 1.0 - std::pow(config_.beta1, t);
  const double bias2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw ShapeError("Adam: gradient shape mismatch for " + p.name);
    }
    Matrix& m = state_.first_moment[i];
    Matrix& v = state_.second_moment[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * p.grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / bias1) /
                       ((v.array() / bias2).sqrt() + config_.eps);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

OneCycleSchedule::OneCycleSchedule(std::int64_t total_steps, double peak_lr,
                                   double warmup_fraction,
                                   double initial_divisor,
                                   double final_divisor)
    : total_steps_(total_steps),
      peak_lr_(peak_lr),
      initial_divisor_(initial_divisor),
      final_divisor_(final_divisor) {
  if (total_steps < 2) {
    throw ConfigError("OneCycleSchedule: total_steps must be at least 2");
  }
  if (!(peak_lr > 0.0)) throw ConfigError("OneCycleSchedule: peak_lr must be positive");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("OneCycleSchedule: warmup_fraction must lie in (0, 1)");
  }
  if (!(initial_divisor > 1.0) || !(final_divisor > 1.0)) {
    throw ConfigError("OneCycleSchedule: divisors must exceed 1");
  }
  const auto w = static_cast<std::int64_t>(
      std::llround(warmup_fraction * static_cast<double>(total_steps)));
  warmup_step_ = std::clamp<std::int64_t>(w, 1, total_steps - 1);
}

double OneCycleSchedule::lr(std::int64_t step) const {
  if (step < 0 || step > total_steps_) {
    throw ConfigError("OneCycleSchedule: step " + std::to_string(step) +
                      " outside [0, " + std::to_string(total_steps_) + "]");
  }
  auto cos_anneal = [](double from, double to, double frac) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
  };
  if (step <= warmup_step_) {
    const double frac =
        static_cast<double>(step) / static_cast<double>(warmup_step_);
    return cos_anneal(initial_lr(), peak_lr_, frac);
  }
  const double frac = static_cast<double>(step - warmup_step_) /
                      static_cast<double>(total_steps_ - warmup_step_);
  return cos_anneal(peak_lr_, final_lr(), frac);
}

}  // namespace weldad::nn
