#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "lut/tensor.hpp"

namespace lut {

// Per-coordinate mean/variance statistics.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> inv_std;
  double eps = 1e-5;

  static FeatureNormalizer fit(std::span<const Tensor> sequences, double eps = 1e-5);
  Tensor apply(const Tensor& frames) const;
};

enum class Normalization { kNone, kUtterance };

struct FeaturizeOptions {
  std::size_t stack_right = 5;
  std::size_t downsample = 3;
  Normalization normalization = Normalization::kUtterance;
  // When set, used instead of per-utterance statistics.
  const FeatureNormalizer* normalizer = nullptr;
};

// Concatenates each raw frame with its `stack_right` right neighbours
// (repeating the last frame past the edge), keeps every `downsample`-th
// stacked frame starting at 0, then normalizes. Output: [ceil(T/d) x
// (1 + stack_right) * F0].
Tensor featurize(const Tensor& raw, const FeaturizeOptions& options = {});

struct SpecAugmentOptions {
  std::size_t freq_max_width = 2;
  std::size_t freq_masks = 2;
  std::size_t time_max_width = 6;
  std::size_t time_masks = 2;

  // Values used at full 80-dimensional feature width.
  static SpecAugmentOptions full_width() { return {30, 2, 40, 2}; }
};

struct SpecAugmentResult {
  Tensor features;
  // [begin, end) ranges that were zeroed; zero-width draws are omitted.
  std::vector<std::pair<std::size_t, std::size_t>> freq_bands;
  std::vector<std::pair<std::size_t, std::size_t>> time_spans;
};

// Zeroes up to freq_masks feature bands and time_masks frame spans. Widths
// are uniform in [0, max_width], clipped to the tensor.
SpecAugmentResult spec_augment(const Tensor& x, const SpecAugmentOptions& options,
                               std::mt19937_64& rng);

}  // namespace lut
