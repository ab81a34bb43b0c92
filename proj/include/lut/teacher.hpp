#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lut/checkpoint.hpp"
#include "lut/nn.hpp"
#include "lut/optim.hpp"
#include "lut/tensor.hpp"
#include "lut/vocab.hpp"

namespace lut {

struct TeacherConfig {
  std::size_t d_model = 32;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t d_ff = 64;
  double mask_prob = 0.15;
  std::size_t steps = 3000;
  std::size_t batch_sentences = 16;
  double peak_lr = 2e-3;
  std::size_t warmup_steps = 200;
  double heldout_fraction = 0.1;
  // 1-based index of the layer whose outputs are the targets; 0 means last.
  std::size_t supervision_layer = 0;
  std::uint64_t seed = 1;
};

// Frozen targets for one transcription.
struct TeacherEmbedding {
  Tensor h_c;        // [d_model]
  Tensor per_token;  // [T_z x d_model]
};

enum class TeacherMode { kTrained, kTable };

// Small masked-token encoder with a learned prepended class token, or a
// fixed random lookup table.
class TeacherModel {
 public:
  // Untrained encoder over `vocab_size` ids; `unk` replaces out-of-range ids.
  TeacherModel(std::size_t vocab_size, int unk, const TeacherConfig& config);

  // per_token[i] is a seeded Gaussian row for z_i; h_c is the row mean.
  static TeacherModel table_mode(const Vocab& vocab, std::size_t d_model, std::uint64_t seed);

  // Pure once frozen. Throws EmptyInputError for an empty sequence.
  TeacherEmbedding embed(std::span<const int> z) const;

  // Masked-prediction log-probs [T_z x V] with the flagged positions replaced
  // by the mask token. Taped, for training.
  Tensor masked_log_probs(std::span<const int> z, const std::vector<bool>& masked) const;

  // One optimizer update on a batch of sentences. A frozen teacher ignores the
  // call and returns nullopt.
  std::optional<double> train_step(const std::vector<std::vector<int>>& batch, Adam& optimizer,
                                    double lr, std::mt19937_64& rng);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  TeacherMode mode() const { return mode_; }
  std::size_t d_model() const { return config_.d_model; }
  std::size_t vocab_size() const { return vocab_size_; }
  const TeacherConfig& config() const { return config_; }

  nn::ParameterList parameters() const;

  // Checkpoint tagged kind=teacher. Loading yields a frozen teacher.
  Checkpoint to_checkpoint() const;
  static TeacherModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  TeacherModel() = default;
  std::vector<int> clean(std::span<const int> z) const;
  // Hidden states [1 + T_z x d] after `depth` layers; row 0 is the class token.
  Tensor encode(std::span<const int> ids, const std::vector<bool>* masked,
                std::size_t depth) const;
  std::size_t depth() const;

  TeacherConfig config_;
  TeacherMode mode_ = TeacherMode::kTrained;
  std::size_t vocab_size_ = 0;
  int unk_ = 0;
  bool frozen_ = false;
  Tensor token_table_;  // [V x d]
  Tensor cls_;          // [1 x d]
  Tensor mask_token_;   // [1 x d]
  std::vector<nn::EncoderLayer> layers_;
  nn::Linear output_;   // d -> V
};

struct TeacherReport {
  std::size_t steps = 0;
  double final_loss = 0.0;
  // Each held-out position masked alone and predicted from the rest.
  double heldout_accuracy = 0.0;
  std::size_t heldout_sentences = 0;
};

// Trains the masked-token encoder on `sentences` (source ids), then freezes
// it. Throws EmptyInputError for an empty corpus.
TeacherModel train_teacher(const std::vector<std::vector<int>>& sentences, const Vocab& vocab,
                           const TeacherConfig& config, TeacherReport* report = nullptr);

// Accuracy of predicting each position of each sentence with only that
// position masked.
double masked_accuracy(const TeacherModel& teacher, const std::vector<std::vector<int>>& sentences);

}  // namespace lut
