#pragma once

#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "lut/tensor.hpp"

// Differentiable primitives. Every function records a backward closure on the
// active tape when at least one input requires a gradient. Matrices are 2-D
// row-major tensors; "vector" means a 1-D tensor.
namespace lut::ops {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a . b^T for a: [m x k], b: [n x k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// a: [m x n] plus a length-n vector broadcast over rows.
Tensor add_row_vector(const Tensor& a, const Tensor& row);
Tensor relu(const Tensor& a);
// Elementwise log(exp(a) + exp(b)); gradients are zero where both are -inf.
Tensor logaddexp(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over rows of [m x n] -> vector of length n.
Tensor mean_rows(const Tensor& a);
// Mean of squared differences over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

// axis < 0 counts from the end. Slices must contain at least one finite value;
// NaN or +inf raises NumericError.
Tensor softmax(const Tensor& a, int axis = -1);
Tensor log_softmax(const Tensor& a, int axis = -1);

// Per-row normalization with population variance plus eps.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Rows of `table` selected by ids -> [ids.size() x d].
Tensor embedding(const Tensor& table, std::span<const int> ids);
// out[i] = a[index[i]] for a vector `a`.
Tensor gather(const Tensor& a, std::span<const int> index);
// out[i] = a[i, index[i]] for a matrix `a`.
Tensor pick(const Tensor& a, std::span<const int> index);
Tensor select_row(const Tensor& a, std::size_t row);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
// out[i] = a[i - k] for i >= k, `fill` otherwise. Vector input.
Tensor shift(const Tensor& a, std::size_t k, double fill);
Tensor reshape(const Tensor& a, Shape shape);

// Inverted dropout. Identity (same tensor) when rate == 0.
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

struct ConvGeometry {
  std::size_t stride_time = 1;
  std::size_t stride_feature = 1;
  std::size_t pad_time = 0;
  std::size_t pad_feature = 0;
};

// Single-input-channel 2-D convolution over a [time x feature] plane.
// weight: [channels x kt x kf], bias: [channels]. Output is
// [time_out x channels * feature_out], channel-major within a row.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvGeometry& geometry);

}  // namespace lut::ops
