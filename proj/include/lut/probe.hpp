#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lut/corpus.hpp"
#include "lut/model.hpp"

namespace lut {

enum class ProbeLayer { kAcoustic, kSemantic };
enum class ProbeTask { kSpeaker, kIntent };

ProbeTask parse_probe_task(const std::string& s);  // "speaker" | "intent"
std::string to_string(ProbeTask task);
std::string to_string(ProbeLayer layer);

struct ProbeOptions {
  std::size_t steps = 2000;
  double lr = 0.01;
  double test_fraction = 0.3;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t classes = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

// Softmax linear classifier on frozen features, standardized with training
// statistics and fitted full-batch with Adam. Throws UsageError when fewer
// than two classes are present.
ProbeResult linear_probe(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const ProbeOptions& options = {});

// Time-averaged h_ae or h_se per utterance.
std::vector<std::vector<double>> pooled_features(const LutModel& model,
                                                 std::span<const Utterance> utts,
                                                 ProbeLayer layer);
std::vector<int> probe_labels(std::span<const Utterance> utts, ProbeTask task);

}  // namespace lut
