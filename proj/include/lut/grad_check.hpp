#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lut/nn.hpp"
#include "lut/tensor.hpp"

namespace lut {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so that coordinates whose true
  // gradient is ~0 are judged on absolute error.
  double scale_floor = 1e-4;
  // When nonzero, at most this many coordinates per tensor are checked,
  // chosen with `seed`.
  std::size_t max_coords_per_tensor = 0;
  unsigned long long seed = 0;
};

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::vector<std::size_t> flagged;  // positions in `entries`
  double max_relative_error = 0.0;

  bool passed() const { return flagged.empty(); }
};

GradCheckReport compare_gradients(std::span<const double> analytic,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options = {});

// Central differences of f at `point` against the taped gradient.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                           const GradCheckOptions& options = {});

// Same, over every tensor in `params`; `loss` rebuilds the graph from the
// current parameter values on each call.
GradCheckReport grad_check(const std::function<Tensor()>& loss, nn::ParameterList& params,
                           const GradCheckOptions& options = {});

}  // namespace lut
