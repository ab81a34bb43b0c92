#include "lut/features.hpp"

#include <algorithm>
#include <cmath>

#include "lut/error.hpp"

namespace lut {

namespace {

void check_frames(const Tensor& t, const char* what) {
  if (t.ndim() != 2) {
    throw DimensionError(std::string(what) + " expects [frames x width], got " +
                         shape_string(t.shape()));
  }
}

FeatureNormalizer stats_of(std::span<const Tensor> seqs, double eps) {
  FeatureNormalizer n;
  n.eps = eps;
  std::size_t width = 0, count = 0;
  for (const auto& s : seqs) {
    check_frames(s, "normalizer");
    if (width == 0) width = s.cols();
    if (s.cols() != width) throw DimensionError("normalizer: frame widths differ");
    count += s.rows();
  }
  if (count == 0) throw EmptyInputError("normalizer fitted on zero frames");
  n.mean.assign(width, 0.0);
  std::vector<double> var(width, 0.0);
  for (const auto& s : seqs) {
    for (std::size_t t = 0; t < s.rows(); ++t) {
      for (std::size_t j = 0; j < width; ++j) n.mean[j] += s.at(t, j);
    }
  }
  for (double& m : n.mean) m /= static_cast<double>(count);
  for (const auto& s : seqs) {
    for (std::size_t t = 0; t < s.rows(); ++t) {
      for (std::size_t j = 0; j < width; ++j) {
        const double c = s.at(t, j) - n.mean[j];
        var[j] += c * c;
      }
    }
  }
  n.inv_std.resize(width);
  for (std::size_t j = 0; j < width; ++j) {
    n.inv_std[j] = 1.0 / std::sqrt(var[j] / static_cast<double>(count) + eps);
  }
  return n;
}

}  // namespace

FeatureNormalizer FeatureNormalizer::fit(std::span<const Tensor> sequences, double eps) {
  return stats_of(sequences, eps);
}

Tensor FeatureNormalizer::apply(const Tensor& frames) const {
  check_frames(frames, "normalizer");
  if (frames.cols() != mean.size()) {
    throw DimensionError("normalizer width " + std::to_string(mean.size()) +
                         " applied to " + shape_string(frames.shape()));
  }
  Tensor out(frames.shape());
  auto o = out.mutable_values();
  const std::size_t w = frames.cols();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    o[i] = (frames.at(i) - mean[i % w]) * inv_std[i % w];
  }
  return out;
}

Tensor featurize(const Tensor& raw, const FeaturizeOptions& options) {
  check_frames(raw, "featurize");
  const std::size_t T = raw.rows(), F0 = raw.cols();
  if (T == 0) throw EmptyInputError("featurize: zero raw frames");
  if (options.downsample == 0) throw ConfigError("featurize: downsample must be >= 1");
  const std::size_t width = (1 + options.stack_right) * F0;
  const std::size_t out_frames = (T + options.downsample - 1) / options.downsample;
  Tensor stacked(Shape{out_frames, width});
  auto o = stacked.mutable_values();
  for (std::size_t k = 0; k < out_frames; ++k) {
    const std::size_t t = k * options.downsample;
    for (std::size_t s = 0; s <= options.stack_right; ++s) {
      const std::size_t src = std::min(t + s, T - 1);
      for (std::size_t j = 0; j < F0; ++j) o[k * width + s * F0 + j] = raw.at(src, j);
    }
  }
  if (options.normalizer != nullptr) return options.normalizer->apply(stacked);
  if (options.normalization == Normalization::kUtterance) {
    const Tensor one[] = {stacked};
    return stats_of(one, 1e-5).apply(stacked);
  }
  return stacked;
}

SpecAugmentResult spec_augment(const Tensor& x, const SpecAugmentOptions& options,
                               std::mt19937_64& rng) {
  check_frames(x, "spec_augment");
  const std::size_t T = x.rows(), F = x.cols();
  SpecAugmentResult result{x.clone(), {}, {}};
  auto v = result.features.mutable_values();
  // Draws a width in [0, max_width] and a start so the span fits when
  // possible; wider spans are clipped at the end.
  auto draw = [&](std::size_t max_width, std::size_t extent) {
    std::uniform_int_distribution<std::size_t> wd(0, max_width);
    const std::size_t w = std::min(wd(rng), extent);
    std::uniform_int_distribution<std::size_t> sd(0, extent - w);
    const std::size_t begin = sd(rng);
    return std::pair{begin, begin + w};
  };
  for (std::size_t m = 0; m < options.freq_masks && F > 0; ++m) {
    auto band = draw(options.freq_max_width, F);
    if (band.first == band.second) continue;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t j = band.first; j < band.second; ++j) v[t * F + j] = 0.0;
    }
    result.freq_bands.push_back(band);
  }
  for (std::size_t m = 0; m < options.time_masks && T > 0; ++m) {
    auto span = draw(options.time_max_width, T);
    if (span.first == span.second) continue;
    for (std::size_t t = span.first; t < span.second; ++t) {
      for (std::size_t j = 0; j < F; ++j) v[t * F + j] = 0.0;
    }
    result.time_spans.push_back(span);
  }
  return result;
}

}  // namespace lut
