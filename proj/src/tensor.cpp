#include "lut/tensor.hpp"

#include <sstream>

#include "lut/error.hpp"

namespace lut {

namespace {
thread_local Tape* g_active_tape = nullptr;
}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : s_(std::make_shared<TensorStorage>()) { s_->shape = {0}; }

Tensor::Tensor(Shape shape, double fill) : s_(std::make_shared<TensorStorage>()) {
  s_->value.assign(shape_size(shape), fill);
  s_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : s_(std::make_shared<TensorStorage>()) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  s_->shape = std::move(shape);
  s_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

std::size_t Tensor::rows() const {
  if (ndim() == 2) return s_->shape[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (ndim() == 2) return s_->shape[1];
  if (ndim() == 1) return s_->shape[0];
  return 1;
}

double Tensor::item() const {
  if (size() != 1) {
    throw UsageError("item() on tensor of shape " + shape_string(shape()));
  }
  return s_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (s_->grad.empty()) return std::vector<double>(size(), 0.0);
  return s_->grad;
}

std::vector<double>& Tensor::grad_buffer() { return accumulate_into(*s_); }

Tensor Tensor::clone() const { return Tensor(s_->shape, s_->value); }

std::vector<double>& accumulate_into(TensorStorage& t) {
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
  return t.grad;
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward() on a loss that was not produced on the active tape");
  }
  accumulate_into(loss.storage())[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  Tape* tape = active_tape();
  if (tape == nullptr) throw UsageError("backward() without an active tape");
  tape->backward(loss);
}

}  // namespace lut
