#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lut/checkpoint.hpp"
#include "lut/corpus.hpp"
#include "lut/features.hpp"
#include "lut/model.hpp"
#include "lut/optim.hpp"
#include "lut/teacher.hpp"

namespace lut {

struct TrainPlan {
  // Step-1 (auxiliary) to Step-2 (full) batch ratio.
  std::size_t step1_ratio = 1;
  std::size_t step2_ratio = 1;
  std::size_t max_steps = 5000;
  std::size_t checkpoint_interval = 250;
  // Average the last K checkpoints into the final model; 0 or 1 keeps the
  // final parameters.
  std::size_t average_last_k = 0;
  // Dev loss every eval_interval steps (0 disables); stop after `patience`
  // evaluations without improvement.
  std::size_t eval_interval = 250;
  std::size_t patience = 5;
  std::size_t dev_eval_limit = 200;
  std::size_t frames_budget = 200;
  double grad_clip = 5.0;
  bool spec_augment = false;
  SpecAugmentOptions spec_augment_options;
  std::uint64_t seed = 1;

  void validate() const;
  // Kind of the update at 1-based position `step` in the interleaving.
  StepKind kind_at(std::size_t step) const;
};

struct TrainLogRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double l_ae = 0.0;
  double l_se = 0.0;
  std::optional<double> l_td;
  double l_total = 0.0;
  BranchMode branch = BranchMode::kWordLevel;
  StepKind kind = StepKind::kFull;

  // One JSON object, doubles at round-trip precision.
  std::string to_json() const;
};

struct DevRecord {
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::size_t steps = 0;
  std::size_t step1_updates = 0;
  std::size_t step2_updates = 0;
  std::vector<TrainLogRecord> log;
  std::vector<DevRecord> dev;
  bool early_stopped = false;
  double best_dev_loss = 0.0;
  // The retained (last K) checkpoints.
  std::vector<Checkpoint> checkpoints;
  bool averaged = false;
};

struct TrainHooks {
  // Called after backward and clipping, before the optimizer update.
  std::function<void(StepKind, const LutModel&)> on_gradients;
  std::function<void(const TrainLogRecord&)> on_log;
  // Receives one JSON line per update when set.
  std::ostream* log_stream = nullptr;
};

// Memoized teacher embeddings; valid because a frozen teacher is pure.
class TeacherCache {
 public:
  explicit TeacherCache(const TeacherModel* teacher) : teacher_(teacher) {}
  const TeacherEmbedding* get(const std::vector<int>& z);

 private:
  const TeacherModel* teacher_;
  std::map<std::vector<int>, TeacherEmbedding> cache_;
};

// Mean of the per-utterance loss over a batch.
LossComponents batch_loss(const LutModel& model, std::span<const Utterance> corpus,
                          std::span<const std::size_t> batch, TeacherCache& teachers,
                          StepKind kind, const LossWeights& weights,
                          const nn::ForwardContext& ctx);

// Full-step total loss over (at most `limit`) dev triples, no dropout.
double dev_loss(const LutModel& model, std::span<const Utterance> dev, TeacherCache& teachers,
                std::size_t limit);

// Semi-supervised interleaving: Step-1 batches come from `asr_pairs`, or
// from the (x, z) part of `triples` when it is empty, and optimize the
// encoder terms; Step-2 batches come from `triples` and optimize the full
// objective. Throws EmptyInputError when `triples` is empty.
TrainResult run_semi_supervised(const TrainPlan& plan, const Schedule& schedule, LutModel& model,
                                const TeacherModel* teacher, std::span<const Utterance> triples,
                                std::span<const Utterance> asr_pairs,
                                std::span<const Utterance> dev, const TrainHooks& hooks = {});

}  // namespace lut
