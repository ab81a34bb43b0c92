#pragma once

#include <cstddef>
#include <vector>

#include "lut/nn.hpp"

namespace lut {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(nn::ParameterList params, AdamOptions options = {});

  // One update with learning rate `lr` using the accumulated gradients
  // (missing gradients count as zero). Throws NumericError, leaving every
  // parameter and moment untouched, if any gradient is non-finite.
  void step(double lr);

  std::size_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  const nn::ParameterList& parameters() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  nn::ParameterList params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t step_ = 0;
};

// Scales gradients so that their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(nn::ParameterList& params, double max_norm);

struct Schedule {
  double peak_lr = 4e-4;
  std::size_t warmup_steps = 25000;
  double decay_rate = 0.5;
  std::size_t decay_steps = 50000;

  // Scaled-down schedule used for synthetic runs.
  static Schedule desk() { return {1e-3, 500, 0.5, 1000}; }
};

// Linear warmup to peak_lr, then peak_lr * decay_rate^floor((step - warmup) /
// decay_steps). step >= 1.
double lr_at(std::size_t step, const Schedule& schedule);

}  // namespace lut
