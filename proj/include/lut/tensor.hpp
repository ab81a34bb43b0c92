#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lut {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorStorage {
  Shape shape;
  std::vector<double> value;
  // Empty until the first gradient accumulation reaches this tensor.
  std::vector<double> grad;
  bool requires_grad = false;
};

// Dense row-major array of doubles with an optional gradient buffer.
// Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  // Leaf tensor that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape& shape() const { return s_->shape; }
  std::size_t ndim() const { return s_->shape.size(); }
  std::size_t size() const { return s_->value.size(); }
  // Rows/cols of a matrix. A vector is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return s_->value; }
  std::span<double> mutable_values() { return s_->value; }
  const std::vector<double>& data() const { return s_->value; }
  double item() const;
  double at(std::size_t i) const { return s_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return s_->value[r * cols() + c]; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }
  bool has_grad() const { return !s_->grad.empty(); }
  // Zeros if no gradient has been accumulated.
  std::vector<double> grad() const;
  std::vector<double>& grad_buffer();
  void zero_grad() { s_->grad.clear(); }

  // Deep copy without gradient history.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  TensorStorage& storage() const { return *s_; }
  const std::shared_ptr<TensorStorage>& shared() const { return s_; }
  bool same_storage(const Tensor& other) const { return s_ == other.s_; }

 private:
  std::shared_ptr<TensorStorage> s_;
};

// Ordered record of differentiable operations. Ops executed while a tape is
// active append a backward closure; backward() replays them in reverse, which
// is reverse topological order because every entry's inputs were produced by
// earlier entries or are leaves.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { entries_.push_back(std::move(fn)); }
  // Seeds d(loss)/d(loss) = 1 and runs every entry once. The tape is cleared
  // afterwards.
  void backward(const Tensor& loss);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<BackwardFn> entries_;
};

Tape* active_tape();

// Installs a tape as the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Disables recording for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// Runs backward on the active tape.
void backward(const Tensor& loss);

// Returns the gradient buffer of `t`, allocating zeros on first use.
std::vector<double>& accumulate_into(TensorStorage& t);

}  // namespace lut
