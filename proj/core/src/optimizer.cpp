#include "pltr/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "pltr/error.hpp"

namespace pltr {

LinearWarmupSchedule::LinearWarmupSchedule(double peak, std::size_t total_steps, std::size_t warmup_steps)
    : peak_(peak), total_(std::max<std::size_t>(1, total_steps)), warmup_(std::max<std::size_t>(1, warmup_steps)) {
  if (!(peak > 0.0)) throw ValidationError("learning rate must be positive");
}

double LinearWarmupSchedule::rate(std::size_t step) const {
  if (step <= warmup_) return peak_ * static_cast<double>(step) / static_cast<double>(warmup_);
  if (step >= total_ || total_ <= warmup_) return 0.0;
  return peak_ * static_cast<double>(total_ - step) / static_cast<double>(total_ - warmup_);
}

AdamW::AdamW(std::size_t size, AdamWConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void AdamW::step(ParameterVector& params, const Gradients& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ValidationError("optimizer size mismatch");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto& p = params.values;
  const auto& g = grad.values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    p[i] -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * p[i]);
  }
}

double clip_global_norm(Gradients& grad, double max_norm) {
  const double norm = std::sqrt(grad.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace pltr
