#include "lut/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lut/error.hpp"

namespace lut {

namespace {

double relative_error(double a, double n, double floor) {
  const double scale = std::max({std::abs(a), std::abs(n), floor});
  return std::abs(a - n) / scale;
}

void add_entry(GradCheckReport& report, GradCheckEntry e, const GradCheckOptions& o) {
  e.relative_error = relative_error(e.analytic, e.numeric, o.scale_floor);
  report.max_relative_error = std::max(report.max_relative_error, e.relative_error);
  if (!(e.relative_error < o.tolerance)) report.flagged.push_back(report.entries.size());
  report.entries.push_back(std::move(e));
}

std::vector<std::size_t> coordinates(std::size_t n, const GradCheckOptions& o,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (o.max_coords_per_tensor != 0 && n > o.max_coords_per_tensor) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(o.max_coords_per_tensor);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

double central_difference(const std::function<double()>& eval, double& coord, double h) {
  const double saved = coord;
  coord = saved + h;
  const double up = eval();
  coord = saved - h;
  const double down = eval();
  coord = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

GradCheckReport compare_gradients(std::span<const double> analytic,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options) {
  if (analytic.size() != numeric.size()) {
    throw DimensionError("compare_gradients: sizes differ");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    add_entry(report, {"", i, analytic[i], numeric[i], 0.0}, options);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                           const GradCheckOptions& options) {
  Tensor x = point.clone();
  x.set_requires_grad(true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = f(x);
    tape.backward(loss);
  }
  const std::vector<double> analytic = x.grad();
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  auto eval = [&]() {
    NoGradScope no_grad;
    return f(x).item();
  };
  for (std::size_t i : coordinates(x.size(), options, rng)) {
    const double numeric = central_difference(eval, x.mutable_values()[i], options.step);
    add_entry(report, {"x", i, analytic[i], numeric, 0.0}, options);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss, nn::ParameterList& params,
                           const GradCheckOptions& options) {
  nn::zero_grads(params);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor l = loss();
    tape.backward(l);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.tensor.grad());
  nn::zero_grads(params);

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  auto eval = [&]() {
    NoGradScope no_grad;
    return loss().item();
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p].tensor;
    for (std::size_t i : coordinates(t.size(), options, rng)) {
      const double numeric = central_difference(eval, t.mutable_values()[i], options.step);
      add_entry(report, {params[p].name, i, analytic[p][i], numeric, 0.0}, options);
    }
  }
  return report;
}

}  // namespace lut
