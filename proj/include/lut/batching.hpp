#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lut/corpus.hpp"
#include "lut/tensor.hpp"

namespace lut {

// Indices into a corpus; the unpadded frame total never exceeds the budget.
using BatchIndices = std::vector<std::size_t>;

// Buckets utterances by length (stable sort), packs consecutive ones
// greedily under `frames_budget`, then shuffles batch order with `seed`.
// Every index appears exactly once. Throws ConfigError if any single length
// exceeds the budget.
std::vector<BatchIndices> make_batches(std::span<const std::size_t> frame_lengths,
                                       std::size_t frames_budget, std::uint64_t seed);
std::vector<BatchIndices> make_batches(std::span<const Utterance> corpus,
                                       std::size_t frames_budget, std::uint64_t seed);

// Indices of utterances whose transcription fits a CTC alignment; the rest
// are reported on stderr.
std::vector<std::size_t> feasible_indices(std::span<const Utterance> corpus);

// Endless epoch-by-epoch batch stream; epoch e is shuffled with seed + e.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> frame_lengths, std::size_t frames_budget,
              std::uint64_t seed);
  // Positions refer to the lengths passed at construction.
  const BatchIndices& next();
  std::size_t epoch() const { return epoch_; }

 private:
  void refill();

  std::vector<std::size_t> lengths_;
  std::size_t budget_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<BatchIndices> batches_;
};

// Padded view of a batch.
struct Batch {
  Tensor features;                    // [B x T_max x F], zero padded
  std::vector<std::size_t> frame_lengths;
  std::vector<std::vector<int>> z;    // padded with the source <pad> id
  std::vector<std::size_t> z_lengths;
  std::vector<std::vector<int>> y;    // padded with the target <pad> id; empty rows for ASR pairs
  std::vector<std::size_t> y_lengths;
  std::vector<std::vector<bool>> frame_mask;  // true on real frames
};

Batch collate(std::span<const Utterance> corpus, const BatchIndices& indices, int source_pad,
              int target_pad);

std::size_t total_frames(std::span<const Utterance> corpus, const BatchIndices& indices);

}  // namespace lut
