#include "lut/ctc.hpp"

#include <cmath>
#include <limits>

#include "lut/error.hpp"
#include "lut/ops.hpp"

namespace lut::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void validate(const Tensor& log_probs, std::span<const int> z, int blank) {
  if (log_probs.ndim() != 2) {
    throw DimensionError("CTC expects [frames x classes] log-probs, got " +
                         shape_string(log_probs.shape()));
  }
  const int classes = static_cast<int>(log_probs.cols());
  if (blank < 0 || blank >= classes) throw DimensionError("CTC blank id outside class range");
  for (int label : z) {
    if (label == blank) throw UsageError("CTC target contains the blank symbol");
    if (label < 0 || label >= classes) {
      throw DimensionError("CTC label " + std::to_string(label) + " outside " +
                           std::to_string(classes) + " classes");
    }
  }
}

void require_feasible(const Tensor& log_probs, std::span<const int> z) {
  if (!feasible(log_probs.rows(), z)) {
    throw InfeasibleAlignmentError("no CTC alignment of " + std::to_string(z.size()) +
                                   " labels fits in " + std::to_string(log_probs.rows()) +
                                   " frames (need " + std::to_string(min_frames(z)) + ")");
  }
}

// s may take the skip transition from s-2: non-blank and different from the
// label two states back.
std::vector<bool> skip_allowed(const std::vector<int>& ext, int blank) {
  std::vector<bool> ok(ext.size(), false);
  for (std::size_t s = 2; s < ext.size(); ++s) ok[s] = ext[s] != blank && ext[s] != ext[s - 2];
  return ok;
}

}  // namespace

std::vector<int> collapse(std::span<const int> raw, int blank) {
  std::vector<int> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i > 0 && raw[i] == raw[i - 1]) continue;
    if (raw[i] != blank) out.push_back(raw[i]);
  }
  return out;
}

std::vector<int> expand(std::span<const int> z, int blank) {
  std::vector<int> ext;
  ext.reserve(2 * z.size() + 1);
  ext.push_back(blank);
  for (int label : z) {
    ext.push_back(label);
    ext.push_back(blank);
  }
  return ext;
}

std::size_t min_frames(std::span<const int> z) {
  std::size_t n = z.size();
  for (std::size_t i = 1; i < z.size(); ++i) {
    if (z[i] == z[i - 1]) ++n;
  }
  return n;
}

bool feasible(std::size_t frames, std::span<const int> z) { return frames >= min_frames(z); }

PathPosterior forward_lattice(const Tensor& log_probs, std::span<const int> z, int blank) {
  validate(log_probs, z, blank);
  require_feasible(log_probs, z);
  const std::vector<int> ext = expand(z, blank);
  const auto skip = skip_allowed(ext, blank);
  const std::size_t T = log_probs.rows(), S = ext.size(),
                    C = log_probs.cols();
  PathPosterior p{T, S, std::vector<double>(T * S, kNegInf), kNegInf};
  const auto& lp = log_probs.data();
  if (T == 0) {
    p.log_likelihood = z.empty() ? 0.0 : kNegInf;
    return p;
  }
  p.log_alpha[0] = lp[static_cast<std::size_t>(ext[0])];
  if (S > 1) p.log_alpha[1] = lp[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      double a = p.log_alpha[(t - 1) * S + s];
      if (s >= 1) a = log_add(a, p.log_alpha[(t - 1) * S + s - 1]);
      if (skip[s]) a = log_add(a, p.log_alpha[(t - 1) * S + s - 2]);
      p.log_alpha[t * S + s] = a + lp[t * C + static_cast<std::size_t>(ext[s])];
    }
  }
  const double last = p.log_alpha[(T - 1) * S + S - 1];
  p.log_likelihood = S > 1 ? log_add(last, p.log_alpha[(T - 1) * S + S - 2]) : last;
  return p;
}

Tensor ctc_loss(const Tensor& log_probs, std::span<const int> z, int blank) {
  validate(log_probs, z, blank);
  require_feasible(log_probs, z);
  const std::vector<int> ext = expand(z, blank);
  const auto skip = skip_allowed(ext, blank);
  const std::size_t T = log_probs.rows(), S = ext.size();
  if (T == 0) throw InfeasibleAlignmentError("CTC over zero frames");

  std::vector<double> init(S, kNegInf);
  init[0] = 0.0;
  if (S > 1) init[1] = 0.0;
  std::vector<double> skip_mask(S, kNegInf);
  for (std::size_t s = 0; s < S; ++s) {
    if (skip[s]) skip_mask[s] = 0.0;
  }
  const Tensor init_t(Shape{S}, std::move(init));
  const Tensor skip_t(Shape{S}, std::move(skip_mask));

  // alpha_t = logsumexp(alpha_{t-1}[s], alpha_{t-1}[s-1], alpha_{t-1}[s-2]
  //           where allowed) + log p_t(ext[s])
  Tensor alpha = ops::add(ops::gather(ops::select_row(log_probs, 0), ext), init_t);
  for (std::size_t t = 1; t < T; ++t) {
    Tensor stay_or_step = ops::logaddexp(alpha, ops::shift(alpha, 1, kNegInf));
    Tensor prev = S > 2 ? ops::logaddexp(stay_or_step,
                                         ops::add(ops::shift(alpha, 2, kNegInf), skip_t))
                        : stay_or_step;
    alpha = ops::add(prev, ops::gather(ops::select_row(log_probs, t), ext));
  }
  Tensor log_likelihood;
  if (S > 1) {
    const int tail[] = {static_cast<int>(S - 1)};
    const int before_tail[] = {static_cast<int>(S - 2)};
    log_likelihood = ops::logaddexp(ops::gather(alpha, tail), ops::gather(alpha, before_tail));
  } else {
    const int only[] = {0};
    log_likelihood = ops::gather(alpha, only);
  }
  if (log_likelihood.item() == kNegInf) {
    throw InfeasibleAlignmentError("CTC target has zero probability under the given log-probs");
  }
  return ops::neg(ops::reshape(log_likelihood, Shape{}));
}

double ctc_brute_force(const Tensor& log_probs, std::span<const int> z, int blank,
                       double max_paths) {
  validate(log_probs, z, blank);
  const std::size_t T = log_probs.rows(), C = log_probs.cols();
  if (std::pow(static_cast<double>(C), static_cast<double>(T)) > max_paths) {
    throw SearchSpaceError("brute-force CTC over " + std::to_string(C) + "^" +
                           std::to_string(T) + " paths exceeds the guard");
  }
  const std::vector<int> target(z.begin(), z.end());
  std::vector<int> path(T, 0);
  double total = 0.0;
  const auto& lp = log_probs.data();
  while (true) {
    if (collapse(path, blank) == target) {
      double log_p = 0.0;
      for (std::size_t t = 0; t < T; ++t) log_p += lp[t * C + static_cast<std::size_t>(path[t])];
      total += std::exp(log_p);
    }
    // Odometer increment over C^T paths.
    std::size_t t = 0;
    while (t < T && ++path[t] == static_cast<int>(C)) path[t++] = 0;
    if (t == T) break;
  }
  return total > 0.0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

std::vector<int> greedy_decode(const Tensor& log_probs, int blank) {
  if (log_probs.ndim() != 2) {
    throw DimensionError("greedy_decode expects [frames x classes], got " +
                         shape_string(log_probs.shape()));
  }
  const std::size_t T = log_probs.rows(), C = log_probs.cols();
  std::vector<int> path(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (log_probs.at(t, c) > log_probs.at(t, best)) best = c;
    }
    path[t] = static_cast<int>(best);
  }
  return collapse(path, blank);
}

}  // namespace lut::ctc
