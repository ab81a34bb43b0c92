#include "lut/optim.hpp"

#include <cmath>

#include "lut/error.hpp"

namespace lut {

Adam::Adam(nn::ParameterList params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

void Adam::step(double lr) {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.storage().grad) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter " + p.name + " at step " +
                           std::to_string(step_ + 1));
      }
    }
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k].tensor;
    const auto& g = p.storage().grad;
    auto w = p.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    const bool has = !g.empty();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has ? g[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

double clip_grad_norm(nn::ParameterList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.storage().grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      for (double& g : p.tensor.storage().grad) g *= s;
    }
  }
  return norm;
}

double lr_at(std::size_t step, const Schedule& s) {
  if (step == 0) throw UsageError("lr_at: steps are counted from 1");
  if (s.warmup_steps > 0 && step <= s.warmup_steps) {
    return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
  }
  if (s.decay_steps == 0) return s.peak_lr;
  const auto stairs = static_cast<double>((step - s.warmup_steps) / s.decay_steps);
  return s.peak_lr * std::pow(s.decay_rate, stairs);
}

}  // namespace lut
