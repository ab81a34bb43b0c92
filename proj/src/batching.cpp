#include "lut/batching.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

#include "lut/ctc.hpp"
#include "lut/error.hpp"

namespace lut {

std::vector<BatchIndices> make_batches(std::span<const std::size_t> lengths,
                                       std::size_t budget, std::uint64_t seed) {
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] > budget) {
      throw ConfigError("utterance " + std::to_string(i) + " has " + std::to_string(lengths[i]) +
                        " frames, above the batch budget of " + std::to_string(budget));
    }
  }
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<BatchIndices> batches;
  BatchIndices current;
  std::size_t frames = 0;
  for (std::size_t i : order) {
    if (!current.empty() && frames + lengths[i] > budget) {
      batches.push_back(std::move(current));
      current.clear();
      frames = 0;
    }
    current.push_back(i);
    frames += lengths[i];
  }
  if (!current.empty()) batches.push_back(std::move(current));
  std::mt19937_64 rng(seed);
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::vector<BatchIndices> make_batches(std::span<const Utterance> corpus, std::size_t budget,
                                       std::uint64_t seed) {
  std::vector<std::size_t> lengths;
  lengths.reserve(corpus.size());
  for (const auto& u : corpus) lengths.push_back(u.frames());
  return make_batches(lengths, budget, seed);
}

std::vector<std::size_t> feasible_indices(std::span<const Utterance> corpus) {
  std::vector<std::size_t> keep;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (ctc::feasible(corpus[i].frames(), corpus[i].z)) {
      keep.push_back(i);
    } else {
      ++dropped;
    }
  }
  if (dropped > 0) {
    std::cerr << "warning: dropped " << dropped
              << " utterance(s) whose transcription cannot be CTC-aligned\n";
  }
  return keep;
}

BatchStream::BatchStream(std::vector<std::size_t> lengths, std::size_t budget,
                         std::uint64_t seed)
    : lengths_(std::move(lengths)), budget_(budget), seed_(seed) {
  if (lengths_.empty()) throw EmptyInputError("batch stream over an empty corpus");
  refill();
}

void BatchStream::refill() {
  batches_ = make_batches(lengths_, budget_, seed_ + epoch_);
  cursor_ = 0;
}

const BatchIndices& BatchStream::next() {
  if (cursor_ == batches_.size()) {
    ++epoch_;
    refill();
  }
  return batches_[cursor_++];
}

Batch collate(std::span<const Utterance> corpus, const BatchIndices& indices, int source_pad,
              int target_pad) {
  Batch b;
  if (indices.empty()) return b;
  std::size_t t_max = 0, z_max = 0, y_max = 0;
  const std::size_t F = corpus[indices[0]].feature_dim();
  for (std::size_t i : indices) {
    const auto& u = corpus[i];
    if (u.feature_dim() != F) throw DimensionError("collate: feature widths differ");
    t_max = std::max(t_max, u.frames());
    z_max = std::max(z_max, u.z.size());
    if (u.y) y_max = std::max(y_max, u.y->size());
  }
  b.features = Tensor(Shape{indices.size(), t_max, F});
  auto fv = b.features.mutable_values();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& u = corpus[indices[k]];
    std::copy(u.features.data().begin(), u.features.data().end(),
              fv.begin() + static_cast<std::ptrdiff_t>(k * t_max * F));
    b.frame_lengths.push_back(u.frames());
    std::vector<bool> mask(t_max, false);
    std::fill_n(mask.begin(), u.frames(), true);
    b.frame_mask.push_back(std::move(mask));
    auto z = u.z;
    b.z_lengths.push_back(z.size());
    z.resize(z_max, source_pad);
    b.z.push_back(std::move(z));
    std::vector<int> y = u.y ? *u.y : std::vector<int>{};
    b.y_lengths.push_back(y.size());
    y.resize(u.y ? y_max : 0, target_pad);
    b.y.push_back(std::move(y));
  }
  return b;
}

std::size_t total_frames(std::span<const Utterance> corpus, const BatchIndices& indices) {
  std::size_t n = 0;
  for (std::size_t i : indices) n += corpus[i].frames();
  return n;
}

}  // namespace lut
