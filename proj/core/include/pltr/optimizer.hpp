#pragma once

#include <cstddef>

#include "pltr/encoder.hpp"

namespace pltr {

/// Linear warmup to the peak rate over `warmup_steps`, then linear decay to zero
/// at `total_steps`. Step numbers are 1-based.
class LinearWarmupSchedule {
 public:
  LinearWarmupSchedule(double peak, std::size_t total_steps, std::size_t warmup_steps);
  double rate(std::size_t step) const;
  std::size_t warmup_steps() const { return warmup_; }

 private:
  double peak_;
  std::size_t total_;
  std::size_t warmup_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::size_t size, AdamWConfig config);

  void step(ParameterVector& params, const Gradients& grad, double lr);
  std::size_t steps() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamWConfig config_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

/// Rescales grad in place so its global L2 norm is at most max_norm; returns the original norm.
double clip_global_norm(Gradients& grad, double max_norm);

}  // namespace pltr
