#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lut/tensor.hpp"

namespace lut::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedParameter>;

void zero_grads(ParameterList& params);

// Xavier-uniform matrix parameter.
Tensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Tensor normal_parameter(Shape shape, double stddev, std::mt19937_64& rng);
Tensor constant_parameter(Shape shape, double value);

// Sinusoidal table: row t, column 2i = sin(t / 10000^(2i/d)), 2i+1 = cos(...).
Tensor positional_encoding(std::size_t length, std::size_t d_model);

// Per-call options shared by every layer forward.
struct ForwardContext {
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  bool training() const { return dropout > 0.0 && rng != nullptr; }
  Tensor maybe_dropout(const Tensor& t) const;
};

// Sink for attention weight matrices, keyed by layer/head name.
struct AttentionRecorder {
  std::vector<NamedParameter> matrices;
  std::string prefix;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t d);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// softmax(Q K^T / sqrt(d_k) + mask) V. `mask` is an additive constant
// [q x t] (0 or -inf) or absent. When `weights` is non-null the attention
// matrix is copied into it.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t d_k, const Tensor* mask = nullptr,
                            Tensor* weights = nullptr);

// Additive [n x n] mask blocking attention to later positions.
Tensor causal_mask(std::size_t n);

struct MultiHeadAttention {
  std::size_t heads = 1;
  std::size_t d_model = 0;
  Linear query, key, value, output;

  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t heads, std::mt19937_64& rng);
  // Queries from `q_in` [q x d], keys/values from `kv_in` [t x d].
  Tensor forward(const Tensor& q_in, const Tensor& kv_in, const Tensor* mask = nullptr,
                 AttentionRecorder* recorder = nullptr) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

struct FeedForward {
  Linear inner, outer;

  FeedForward() = default;
  FeedForward(std::size_t d_model, std::size_t d_ff, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Post-norm transformer encoder block.
struct EncoderLayer {
  MultiHeadAttention self_attention;
  LayerNorm attention_norm;
  FeedForward feed_forward;
  LayerNorm output_norm;

  EncoderLayer() = default;
  EncoderLayer(std::size_t d_model, std::size_t heads, std::size_t d_ff, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, const ForwardContext& ctx,
                 AttentionRecorder* recorder = nullptr) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

// Post-norm decoder block: causal self-attention, cross-attention, FFN.
struct DecoderLayer {
  MultiHeadAttention self_attention;
  LayerNorm self_norm;
  MultiHeadAttention cross_attention;
  LayerNorm cross_norm;
  FeedForward feed_forward;
  LayerNorm output_norm;

  DecoderLayer() = default;
  DecoderLayer(std::size_t d_model, std::size_t heads, std::size_t d_ff, std::mt19937_64& rng);
  Tensor forward(const Tensor& y, const Tensor& memory, const Tensor& self_mask,
                 const ForwardContext& ctx, AttentionRecorder* recorder = nullptr) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

}  // namespace lut::nn
