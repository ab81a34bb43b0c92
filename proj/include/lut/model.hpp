#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lut/checkpoint.hpp"
#include "lut/corpus.hpp"
#include "lut/nn.hpp"
#include "lut/teacher.hpp"
#include "lut/tensor.hpp"

namespace lut {

enum class BranchMode { kSeqLevel, kWordLevel };

std::string to_string(BranchMode mode);
BranchMode parse_branch_mode(const std::string& s);  // "seq" | "word"

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.05;
  double gamma = 0.45;
};

struct ModelConfig {
  std::size_t n_ae = 2;
  std::size_t n_se = 2;
  std::size_t n_td = 2;
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t d_ff = 64;
  std::size_t feature_dim = 8;
  // CTC output classes: blank, <unk> and the source words.
  std::size_t source_classes = 14;
  std::size_t target_vocab = 16;
  LossWeights weights;
  BranchMode branch = BranchMode::kWordLevel;
  double dropout = 0.1;
  double label_smoothing = 0.0;
  std::size_t max_asr_len = 200;
  std::size_t max_st_len = 250;
  // Seq-level branch convolution over the (time, feature) plane of h_se.
  std::size_t conv_kernel_time = 3;
  std::size_t conv_kernel_feature = 3;
  std::size_t conv_stride_feature = 2;
  std::uint64_t init_seed = 1;

  // Throws ConfigError on negative weights, d_model % heads != 0 or a seq
  // branch convolution whose output width differs from d_model.
  void validate() const;
  // Stable text of every field that shapes the parameters.
  std::string architecture() const;
  std::uint64_t hash() const;
};

// Target-side ids fixed by the target vocabulary layout.
inline constexpr int kTargetPad = 0;
inline constexpr int kTargetSos = 1;
inline constexpr int kTargetEos = 2;
inline constexpr int kBlank = 0;

struct EncoderOutputs {
  Tensor h_ae;           // [T_x x d]
  Tensor ctc_log_probs;  // [T_x x source_classes]
  Tensor h_se;           // [T_x x d]
  std::optional<Tensor> v0;  // [d], seq-level branch
  std::optional<Tensor> v1;  // [T_z x d], word-level branch
};

// Auxiliary steps optimize only the encoder terms with (alpha, beta)
// renormalized to sum to one; full steps use all three weights.
enum class StepKind { kAuxiliary, kFull };

std::string to_string(StepKind kind);

struct LossComponents {
  Tensor total;  // scalar, taped
  double l_ae = 0.0;
  double l_se = 0.0;
  std::optional<double> l_td;  // absent on auxiliary steps
};

// Listen-Understand-Translate model: acoustic encoder with a CTC head,
// semantic encoder with a distance branch against a frozen teacher, and an
// autoregressive decoder attending to the semantic encoder output.
class LutModel {
 public:
  // Without branches the seq/word heads are not built at all; such a model
  // can still load a full checkpoint and translate.
  explicit LutModel(const ModelConfig& config, bool with_branches = true);

  const ModelConfig& config() const { return config_; }
  bool has_branches() const { return with_branches_; }

  nn::ParameterList parameters() const;
  // Subsets by component: "acoustic", "semantic", "branch", "decoder".
  nn::ParameterList parameters(const std::string& component) const;

  std::pair<Tensor, Tensor> acoustic_encode(const Tensor& x, const nn::ForwardContext& ctx = {},
                                            nn::AttentionRecorder* recorder = nullptr) const;
  Tensor semantic_encode(const Tensor& h_ae, const nn::ForwardContext& ctx = {},
                         nn::AttentionRecorder* recorder = nullptr) const;
  Tensor seq_branch(const Tensor& h_se) const;
  Tensor word_branch(const Tensor& h_se, const Tensor& teacher_per_token,
                     nn::AttentionRecorder* recorder = nullptr) const;
  // Log-probs [|prefix| x V_tgt]; row i predicts the token after prefix[0..i].
  // The prefix starts with <sos> and is at most max_st_len long.
  Tensor decode_forward(std::span<const int> prefix, const Tensor& h_se,
                        const nn::ForwardContext& ctx = {},
                        nn::AttentionRecorder* recorder = nullptr) const;

  // Encoder stack; the branch output matching the configured mode is filled
  // in when a teacher embedding is given.
  EncoderOutputs encode(const Tensor& x, const TeacherEmbedding* teacher = nullptr,
                        const nn::ForwardContext& ctx = {},
                        nn::AttentionRecorder* recorder = nullptr) const;

  // Per-utterance objective. The teacher embedding is required when beta > 0.
  LossComponents utterance_loss(const Utterance& u, const TeacherEmbedding* teacher,
                                StepKind kind, const LossWeights& weights,
                                const nn::ForwardContext& ctx = {}) const;

  // Checkpoint carrying the architecture hash; load() verifies it and
  // ignores branch tensors when this model has no branches.
  Checkpoint to_checkpoint(std::map<std::string, std::string> metadata = {}) const;
  void load(const Checkpoint& checkpoint);

 private:
  ModelConfig config_;
  bool with_branches_;
  nn::Linear input_;
  std::vector<nn::EncoderLayer> acoustic_;
  nn::Linear ctc_head_;
  std::vector<nn::EncoderLayer> semantic_;
  Tensor conv_weight_, conv_bias_;
  nn::LayerNorm seq_norm_;
  nn::MultiHeadAttention word_attention_;
  Tensor target_table_;
  std::vector<nn::DecoderLayer> decoder_;
  nn::Linear output_;
};

// Branch distance: MSE(v0, h_c) or MSE(v1, per_token), mean over elements.
Tensor distance_loss(const Tensor& v, const TeacherEmbedding& target, BranchMode mode);

// Mean negative log-likelihood over non-pad targets, with optional label
// smoothing toward the uniform distribution.
Tensor translation_loss(const Tensor& log_probs, std::span<const int> targets,
                        double label_smoothing = 0.0);

// Decoder input <sos> y and target y <eos>.
std::vector<int> decoder_input(std::span<const int> y);
std::vector<int> decoder_target(std::span<const int> y);

}  // namespace lut
