#include "lut/model.hpp"

#include <cmath>
#include <sstream>

#include "lut/ctc.hpp"
#include "lut/error.hpp"
#include "lut/ops.hpp"

namespace lut {

namespace {

std::size_t conv_feature_out(const ModelConfig& c) {
  const std::size_t pad = c.conv_kernel_feature / 2;
  return (c.d_model + 2 * pad - c.conv_kernel_feature) / c.conv_stride_feature + 1;
}

ops::ConvGeometry conv_geometry(const ModelConfig& c) {
  return {1, c.conv_stride_feature, c.conv_kernel_time / 2, c.conv_kernel_feature / 2};
}

// Sets the recorder prefix for one block and restores it afterwards.
class Scope {
 public:
  Scope(nn::AttentionRecorder* r, std::string name) : r_(r) {
    if (r_ != nullptr) {
      saved_ = r_->prefix;
      r_->prefix = std::move(name);
    }
  }
  ~Scope() {
    if (r_ != nullptr) r_->prefix = saved_;
  }

 private:
  nn::AttentionRecorder* r_;
  std::string saved_;
};

Tensor add_positions(const Tensor& x) {
  return ops::add(x, nn::positional_encoding(x.rows(), x.cols()));
}

}  // namespace

std::string to_string(BranchMode mode) {
  return mode == BranchMode::kSeqLevel ? "seq" : "word";
}

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "seq") return BranchMode::kSeqLevel;
  if (s == "word") return BranchMode::kWordLevel;
  throw ConfigError("branch must be seq or word, got '" + s + "'");
}

std::string to_string(StepKind kind) { return kind == StepKind::kFull ? "full" : "auxiliary"; }

void ModelConfig::validate() const {
  if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for positional encoding");
  if (feature_dim == 0 || source_classes < 2 || target_vocab < 4) {
    throw ConfigError("feature width and vocabulary sizes must be positive");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("label smoothing must lie in [0, 1)");
  }
  if (conv_kernel_time == 0 || conv_kernel_feature == 0 || conv_stride_feature == 0 ||
      conv_kernel_feature > d_model + 2 * (conv_kernel_feature / 2)) {
    throw ConfigError("seq branch convolution does not fit d_model");
  }
  if (conv_stride_feature * conv_feature_out(*this) != d_model) {
    throw ConfigError("seq branch convolution yields width " +
                      std::to_string(conv_stride_feature * conv_feature_out(*this)) +
                      ", expected d_model " + std::to_string(d_model));
  }
  if (max_st_len == 0 || max_asr_len == 0) throw ConfigError("decode lengths must be positive");
}

std::string ModelConfig::architecture() const {
  std::ostringstream os;
  os << "n_ae=" << n_ae << ";n_se=" << n_se << ";n_td=" << n_td << ";d_model=" << d_model
     << ";heads=" << heads << ";d_ff=" << d_ff << ";feature_dim=" << feature_dim
     << ";source_classes=" << source_classes << ";target_vocab=" << target_vocab
     << ";conv=" << conv_kernel_time << "x" << conv_kernel_feature << "/"
     << conv_stride_feature;
  return os.str();
}

std::uint64_t ModelConfig::hash() const { return fnv1a64(architecture()); }

LutModel::LutModel(const ModelConfig& config, bool with_branches)
    : config_(config), with_branches_(with_branches) {
  config_.validate();
  const ModelConfig& c = config_;
  const std::size_t d = c.d_model;
  std::mt19937_64 rng(c.init_seed);
  input_ = nn::Linear(c.feature_dim, d, rng);
  for (std::size_t l = 0; l < c.n_ae; ++l) acoustic_.emplace_back(d, c.heads, c.d_ff, rng);
  ctc_head_ = nn::Linear(d, c.source_classes, rng);
  for (std::size_t l = 0; l < c.n_se; ++l) semantic_.emplace_back(d, c.heads, c.d_ff, rng);
  // Branch parameters are always drawn so both variants consume the same
  // random stream and share every other initial value.
  const std::size_t channels = c.conv_stride_feature;
  const double conv_std =
      std::sqrt(2.0 / static_cast<double>(c.conv_kernel_time * c.conv_kernel_feature));
  Tensor conv_w = nn::normal_parameter(
      Shape{channels, c.conv_kernel_time, c.conv_kernel_feature}, conv_std, rng);
  nn::MultiHeadAttention word(d, c.heads, rng);
  if (with_branches_) {
    conv_weight_ = conv_w;
    conv_bias_ = nn::constant_parameter(Shape{channels}, 0.0);
    seq_norm_ = nn::LayerNorm(d);
    word_attention_ = std::move(word);
  }
  target_table_ =
      nn::normal_parameter(Shape{c.target_vocab, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (std::size_t l = 0; l < c.n_td; ++l) decoder_.emplace_back(d, c.heads, c.d_ff, rng);
  output_ = nn::Linear(d, c.target_vocab, rng);
}

nn::ParameterList LutModel::parameters(const std::string& component) const {
  nn::ParameterList out;
  if (component == "acoustic") {
    input_.collect("acoustic.input", out);
    for (std::size_t l = 0; l < acoustic_.size(); ++l) {
      acoustic_[l].collect("acoustic.layer" + std::to_string(l), out);
    }
    ctc_head_.collect("acoustic.ctc", out);
  } else if (component == "semantic") {
    for (std::size_t l = 0; l < semantic_.size(); ++l) {
      semantic_[l].collect("semantic.layer" + std::to_string(l), out);
    }
  } else if (component == "branch") {
    if (!with_branches_) return out;
    out.push_back({"branch.conv.weight", conv_weight_});
    out.push_back({"branch.conv.bias", conv_bias_});
    seq_norm_.collect("branch.seq_norm", out);
    word_attention_.collect("branch.word_attention", out);
  } else if (component == "decoder") {
    out.push_back({"decoder.embedding", target_table_});
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      decoder_[l].collect("decoder.layer" + std::to_string(l), out);
    }
    output_.collect("decoder.output", out);
  } else {
    throw UsageError("unknown model component '" + component + "'");
  }
  return out;
}

nn::ParameterList LutModel::parameters() const {
  nn::ParameterList out;
  for (const char* part : {"acoustic", "semantic", "branch", "decoder"}) {
    auto p = parameters(part);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::pair<Tensor, Tensor> LutModel::acoustic_encode(const Tensor& x,
                                                    const nn::ForwardContext& ctx,
                                                    nn::AttentionRecorder* recorder) const {
  if (x.ndim() != 2 || x.cols() != config_.feature_dim) {
    throw DimensionError("acoustic input must be [T x " + std::to_string(config_.feature_dim) +
                         "], got " + shape_string(x.shape()));
  }
  if (x.rows() == 0) throw EmptyInputError("acoustic input has no frames");
  Tensor h = ctx.maybe_dropout(add_positions(input_.forward(x)));
  for (std::size_t l = 0; l < acoustic_.size(); ++l) {
    Scope scope(recorder, "acoustic.layer" + std::to_string(l));
    h = acoustic_[l].forward(h, ctx, recorder);
  }
  return {h, ops::log_softmax(ctc_head_.forward(h))};
}

Tensor LutModel::semantic_encode(const Tensor& h_ae, const nn::ForwardContext& ctx,
                                 nn::AttentionRecorder* recorder) const {
  Tensor h = h_ae;
  for (std::size_t l = 0; l < semantic_.size(); ++l) {
    Scope scope(recorder, "semantic.layer" + std::to_string(l));
    h = semantic_[l].forward(h, ctx, recorder);
  }
  return h;
}

Tensor LutModel::seq_branch(const Tensor& h_se) const {
  if (!with_branches_) throw UsageError("model was built without branches");
  if (h_se.rows() == 0) throw EmptyInputError("seq branch over an empty sequence");
  Tensor conv = ops::conv2d(h_se, conv_weight_, conv_bias_, conv_geometry(config_));
  return ops::mean_rows(seq_norm_.forward(conv));
}

Tensor LutModel::word_branch(const Tensor& h_se, const Tensor& teacher_per_token,
                             nn::AttentionRecorder* recorder) const {
  if (!with_branches_) throw UsageError("model was built without branches");
  if (teacher_per_token.ndim() != 2 || teacher_per_token.rows() == 0) {
    throw EmptyInputError("word branch needs at least one teacher vector");
  }
  // Teacher vectors enter as constants.
  Tensor queries = teacher_per_token.detach();
  Scope scope(recorder, "branch.word");
  return word_attention_.forward(queries, h_se, nullptr, recorder);
}

Tensor LutModel::decode_forward(std::span<const int> prefix, const Tensor& h_se,
                                const nn::ForwardContext& ctx,
                                nn::AttentionRecorder* recorder) const {
  if (prefix.empty() || prefix[0] != kTargetSos) {
    throw UsageError("decoder prefix must start with <sos>");
  }
  if (prefix.size() > config_.max_st_len) {
    throw UsageError("decoder prefix of " + std::to_string(prefix.size()) +
                     " tokens exceeds the maximum of " + std::to_string(config_.max_st_len));
  }
  for (int id : prefix) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.target_vocab) {
      throw DimensionError("target id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  const double scale = std::sqrt(static_cast<double>(config_.d_model));
  Tensor y = ops::scale(ops::embedding(target_table_, prefix), scale);
  y = ctx.maybe_dropout(add_positions(y));
  const Tensor mask = nn::causal_mask(prefix.size());
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    Scope scope(recorder, "decoder.layer" + std::to_string(l));
    y = decoder_[l].forward(y, h_se, mask, ctx, recorder);
  }
  return ops::log_softmax(output_.forward(y));
}

EncoderOutputs LutModel::encode(const Tensor& x, const TeacherEmbedding* teacher,
                                const nn::ForwardContext& ctx,
                                nn::AttentionRecorder* recorder) const {
  EncoderOutputs out;
  std::tie(out.h_ae, out.ctc_log_probs) = acoustic_encode(x, ctx, recorder);
  out.h_se = semantic_encode(out.h_ae, ctx, recorder);
  if (teacher != nullptr && with_branches_) {
    if (config_.branch == BranchMode::kSeqLevel) {
      out.v0 = seq_branch(out.h_se);
    } else {
      out.v1 = word_branch(out.h_se, teacher->per_token, recorder);
    }
  }
  return out;
}

LossComponents LutModel::utterance_loss(const Utterance& u, const TeacherEmbedding* teacher,
                                        StepKind kind, const LossWeights& weights,
                                        const nn::ForwardContext& ctx) const {
  double a = weights.alpha, b = weights.beta, g = weights.gamma;
  if (kind == StepKind::kAuxiliary) {
    const double s = a + b;
    if (s <= 0.0) throw ConfigError("auxiliary step with alpha + beta = 0");
    a /= s;
    b /= s;
    g = 0.0;
  } else if (!u.y) {
    throw UsageError("full step on utterance " + u.id + " without a translation");
  }
  if (b > 0.0 && (teacher == nullptr || !with_branches_)) {
    throw UsageError("beta > 0 needs a teacher embedding and branch parameters");
  }
  const EncoderOutputs enc = encode(u.features, teacher, ctx);
  LossComponents out;
  std::vector<Tensor> terms;

  Tensor l_ae = ops::scale(ctc::ctc_loss(enc.ctc_log_probs, u.z, kBlank),
                           1.0 / static_cast<double>(u.frames()));
  out.l_ae = l_ae.item();
  if (a > 0.0) terms.push_back(ops::scale(l_ae, a));

  if (teacher != nullptr && with_branches_) {
    Tensor l_se = config_.branch == BranchMode::kSeqLevel
                      ? distance_loss(*enc.v0, *teacher, BranchMode::kSeqLevel)
                      : distance_loss(*enc.v1, *teacher, BranchMode::kWordLevel);
    out.l_se = l_se.item();
    if (b > 0.0) terms.push_back(ops::scale(l_se, b));
  }

  if (kind == StepKind::kFull) {
    const std::vector<int> input = decoder_input(*u.y);
    const std::vector<int> target = decoder_target(*u.y);
    Tensor l_td = translation_loss(decode_forward(input, enc.h_se, ctx), target,
                                   config_.label_smoothing);
    out.l_td = l_td.item();
    if (g > 0.0) terms.push_back(ops::scale(l_td, g));
  }

  if (terms.empty()) {
    out.total = Tensor::scalar(0.0);
  } else {
    out.total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) out.total = ops::add(out.total, terms[i]);
  }
  return out;
}

Checkpoint LutModel::to_checkpoint(std::map<std::string, std::string> metadata) const {
  metadata["kind"] = "lut";
  metadata["architecture"] = config_.architecture();
  metadata["config_hash"] = hex64(config_.hash());
  return snapshot(parameters(), std::move(metadata));
}

void LutModel::load(const Checkpoint& ckpt) {
  auto it = ckpt.metadata.find("config_hash");
  if (it == ckpt.metadata.end()) throw FormatError("checkpoint carries no config hash");
  if (it->second != hex64(config_.hash())) {
    auto arch = ckpt.metadata.find("architecture");
    throw HashMismatchError("checkpoint config hash " + it->second + " (" +
                            (arch == ckpt.metadata.end() ? "?" : arch->second) +
                            ") does not match " + hex64(config_.hash()) + " (" +
                            config_.architecture() + ")");
  }
  nn::ParameterList params = parameters();
  restore(params, ckpt);
}

Tensor distance_loss(const Tensor& v, const TeacherEmbedding& target, BranchMode mode) {
  const Tensor& t = mode == BranchMode::kSeqLevel ? target.h_c : target.per_token;
  if (v.shape() != t.shape()) {
    throw DimensionError("distance loss between " + shape_string(v.shape()) + " and teacher " +
                         shape_string(t.shape()));
  }
  return ops::mse(v, t.detach());
}

Tensor translation_loss(const Tensor& log_probs, std::span<const int> targets,
                        double label_smoothing) {
  if (log_probs.ndim() != 2 || log_probs.rows() != targets.size()) {
    throw DimensionError("translation loss over " + shape_string(log_probs.shape()) + " for " +
                         std::to_string(targets.size()) + " targets");
  }
  std::vector<int> rows, ids;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == kTargetPad) continue;
    rows.push_back(static_cast<int>(i));
    ids.push_back(targets[i]);
  }
  if (rows.empty()) throw EmptyInputError("translation loss with no non-pad target");
  Tensor lp = ops::embedding(log_probs, rows);
  const double n = static_cast<double>(rows.size());
  Tensor nll = ops::scale(ops::sum(ops::pick(lp, ids)), -1.0 / n);
  if (label_smoothing <= 0.0) return nll;
  const double V = static_cast<double>(log_probs.cols());
  Tensor smooth = ops::scale(ops::sum(lp), -1.0 / (n * V));
  return ops::add(ops::scale(nll, 1.0 - label_smoothing), ops::scale(smooth, label_smoothing));
}

std::vector<int> decoder_input(std::span<const int> y) {
  std::vector<int> in{kTargetSos};
  in.insert(in.end(), y.begin(), y.end());
  return in;
}

std::vector<int> decoder_target(std::span<const int> y) {
  std::vector<int> out(y.begin(), y.end());
  out.push_back(kTargetEos);
  return out;
}

}  // namespace lut
