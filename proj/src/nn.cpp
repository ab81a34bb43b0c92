#include "lut/nn.hpp"

#include <cmath>

#include "lut/error.hpp"
#include "lut/ops.hpp"

namespace lut::nn {

void zero_grads(ParameterList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

Tensor xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return Tensor::parameter(Shape{rows, cols}, std::move(v));
}

Tensor normal_parameter(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor constant_parameter(Shape shape, double value) {
  std::vector<double> v(shape_size(shape), value);
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor positional_encoding(std::size_t length, std::size_t d_model) {
  std::vector<double> v(length * d_model);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double rate =
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) / rate;
      v[t * d_model + i] = std::sin(angle);
      if (i + 1 < d_model) v[t * d_model + i + 1] = std::cos(angle);
    }
  }
  return Tensor::matrix(length, d_model, std::move(v));
}

Tensor ForwardContext::maybe_dropout(const Tensor& t) const {
  if (!training()) return t;
  return ops::dropout(t, dropout, *rng);
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight(xavier(in, out, rng)), bias(constant_parameter(Shape{out}, 0.0)) {}

Tensor Linear::forward(const Tensor& x) const {
  return ops::add_row_vector(ops::matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t d)
    : gain(constant_parameter(Shape{d}, 1.0)), bias(constant_parameter(Shape{d}, 0.0)) {}

Tensor LayerNorm::forward(const Tensor& x) const { return ops::layer_norm(x, gain, bias, eps); }

void LayerNorm::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t d_k, const Tensor* mask, Tensor* weights) {
  if (q.cols() != d_k || k.cols() != d_k) {
    throw DimensionError("attention key width " + std::to_string(d_k) + " vs Q " +
                         shape_string(q.shape()) + ", K " + shape_string(k.shape()));
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention K " + shape_string(k.shape()) + " and V " +
                         shape_string(v.shape()) + " lengths differ");
  }
  Tensor scores = ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_k)));
  if (mask != nullptr) scores = ops::add(scores, *mask);
  Tensor attn = ops::softmax(scores, -1);
  if (weights != nullptr) *weights = attn.clone();
  return ops::matmul(attn, v);
}

Tensor causal_mask(std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = ops::kNegInf;
  }
  return Tensor::matrix(n, n, std::move(m));
}

MultiHeadAttention::MultiHeadAttention(std::size_t d, std::size_t j, std::mt19937_64& rng)
    : heads(j), d_model(d) {
  if (j == 0 || d % j != 0) {
    throw ConfigError("d_model " + std::to_string(d) + " is not divisible by " +
                      std::to_string(j) + " heads");
  }
  query = Linear(d, d, rng);
  key = Linear(d, d, rng);
  value = Linear(d, d, rng);
  output = Linear(d, d, rng);
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& kv_in, const Tensor* mask,
                                   AttentionRecorder* recorder) const {
  if (q_in.cols() != d_model || kv_in.cols() != d_model) {
    throw DimensionError("multi-head attention expects width " + std::to_string(d_model) +
                         ", got " + shape_string(q_in.shape()) + " and " +
                         shape_string(kv_in.shape()));
  }
  const std::size_t d_k = d_model / heads;
  Tensor q = query.forward(q_in);
  Tensor k = key.forward(kv_in);
  Tensor v = value.forward(kv_in);
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor weights;
    parts.push_back(scaled_dot_attention(
        heads == 1 ? q : ops::slice_cols(q, h * d_k, d_k),
        heads == 1 ? k : ops::slice_cols(k, h * d_k, d_k),
        heads == 1 ? v : ops::slice_cols(v, h * d_k, d_k), d_k, mask,
        recorder != nullptr ? &weights : nullptr));
    if (recorder != nullptr) {
      recorder->matrices.push_back({recorder->prefix + ".head" + std::to_string(h), weights});
    }
  }
  Tensor merged = heads == 1 ? parts[0] : ops::concat_cols(parts);
  return output.forward(merged);
}

void MultiHeadAttention::collect(const std::string& prefix, ParameterList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  output.collect(prefix + ".output", out);
}

FeedForward::FeedForward(std::size_t d_model, std::size_t d_ff, std::mt19937_64& rng)
    : inner(d_model, d_ff, rng), outer(d_ff, d_model, rng) {}

Tensor FeedForward::forward(const Tensor& x, const ForwardContext& ctx) const {
  return outer.forward(ctx.maybe_dropout(ops::relu(inner.forward(x))));
}

void FeedForward::collect(const std::string& prefix, ParameterList& out) const {
  inner.collect(prefix + ".inner", out);
  outer.collect(prefix + ".outer", out);
}

namespace {

// Scopes recorder names to one sublayer and restores the previous prefix.
class RecorderPrefix {
 public:
  RecorderPrefix(AttentionRecorder* r, const std::string& suffix) : r_(r) {
    if (r_ != nullptr) {
      saved_ = r_->prefix;
      r_->prefix += suffix;
    }
  }
  ~RecorderPrefix() {
    if (r_ != nullptr) r_->prefix = saved_;
  }

 private:
  AttentionRecorder* r_;
  std::string saved_;
};

}  // namespace

EncoderLayer::EncoderLayer(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                           std::mt19937_64& rng)
    : self_attention(d_model, heads, rng),
      attention_norm(d_model),
      feed_forward(d_model, d_ff, rng),
      output_norm(d_model) {}

Tensor EncoderLayer::forward(const Tensor& x, const ForwardContext& ctx,
                             AttentionRecorder* recorder) const {
  Tensor attended;
  {
    RecorderPrefix scope(recorder, ".self");
    attended = self_attention.forward(x, x, nullptr, recorder);
  }
  Tensor h = attention_norm.forward(ops::add(x, ctx.maybe_dropout(attended)));
  return output_norm.forward(ops::add(h, ctx.maybe_dropout(feed_forward.forward(h, ctx))));
}

void EncoderLayer::collect(const std::string& prefix, ParameterList& out) const {
  self_attention.collect(prefix + ".self_attention", out);
  attention_norm.collect(prefix + ".attention_norm", out);
  feed_forward.collect(prefix + ".feed_forward", out);
  output_norm.collect(prefix + ".output_norm", out);
}

DecoderLayer::DecoderLayer(std::size_t d_model, std::size_t heads, std::size_t d_ff,
                           std::mt19937_64& rng)
    : self_attention(d_model, heads, rng),
      self_norm(d_model),
      cross_attention(d_model, heads, rng),
      cross_norm(d_model),
      feed_forward(d_model, d_ff, rng),
      output_norm(d_model) {}

Tensor DecoderLayer::forward(const Tensor& y, const Tensor& memory, const Tensor& self_mask,
                             const ForwardContext& ctx, AttentionRecorder* recorder) const {
  Tensor self_out, cross_out;
  {
    RecorderPrefix scope(recorder, ".self");
    self_out = self_attention.forward(y, y, &self_mask, recorder);
  }
  Tensor h = self_norm.forward(ops::add(y, ctx.maybe_dropout(self_out)));
  {
    RecorderPrefix scope(recorder, ".cross");
    cross_out = cross_attention.forward(h, memory, nullptr, recorder);
  }
  h = cross_norm.forward(ops::add(h, ctx.maybe_dropout(cross_out)));
  return output_norm.forward(ops::add(h, ctx.maybe_dropout(feed_forward.forward(h, ctx))));
}

void DecoderLayer::collect(const std::string& prefix, ParameterList& out) const {
  self_attention.collect(prefix + ".self_attention", out);
  self_norm.collect(prefix + ".self_norm", out);
  cross_attention.collect(prefix + ".cross_attention", out);
  cross_norm.collect(prefix + ".cross_norm", out);
  feed_forward.collect(prefix + ".feed_forward", out);
  output_norm.collect(prefix + ".output_norm", out);
}

}  // namespace lut::nn
