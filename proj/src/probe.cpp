#include "lut/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lut/error.hpp"
#include "lut/ops.hpp"
#include "lut/optim.hpp"

namespace lut {

ProbeTask parse_probe_task(const std::string& s) {
  if (s == "speaker") return ProbeTask::kSpeaker;
  if (s == "intent") return ProbeTask::kIntent;
  throw ConfigError("probe task must be speaker or intent, got '" + s + "'");
}

std::string to_string(ProbeTask task) { return task == ProbeTask::kSpeaker ? "speaker" : "intent"; }
std::string to_string(ProbeLayer layer) { return layer == ProbeLayer::kAcoustic ? "h_ae" : "h_se"; }

namespace {

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    }
    correct += static_cast<int>(best) == labels[i];
  }
  return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

ProbeResult linear_probe(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels, const ProbeOptions& options) {
  if (features.size() != labels.size()) throw DimensionError("probe: one label per feature row");
  std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw UsageError("probe needs at least two classes");
  if (*distinct.begin() < 0) throw UsageError("probe labels must be non-negative");
  const std::size_t C = static_cast<std::size_t>(*distinct.rbegin()) + 1;
  const std::size_t D = features[0].size();

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::round(options.test_fraction * static_cast<double>(features.size())));
  if (n_test == 0 || n_test >= features.size()) throw UsageError("probe split leaves a side empty");
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

  std::vector<double> mean(D, 0.0), inv_std(D, 0.0);
  for (std::size_t i : train) {
    if (features[i].size() != D) throw DimensionError("probe features have differing widths");
    for (std::size_t d = 0; d < D; ++d) mean[d] += features[i][d];
  }
  for (double& m : mean) m /= static_cast<double>(train.size());
  for (std::size_t i : train)
    for (std::size_t d = 0; d < D; ++d) inv_std[d] += std::pow(features[i][d] - mean[d], 2);
  for (double& s : inv_std) s = 1.0 / std::sqrt(s / static_cast<double>(train.size()) + 1e-8);

  auto design = [&](const std::vector<std::size_t>& rows, std::vector<int>& y) {
    std::vector<double> x(rows.size() * D);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t d = 0; d < D; ++d) {
        x[r * D + d] = (features[rows[r]][d] - mean[d]) * inv_std[d];
      }
      y.push_back(labels[rows[r]]);
    }
    return Tensor::matrix(rows.size(), D, std::move(x));
  };
  std::vector<int> y_train, y_test;
  const Tensor x_train = design(train, y_train);
  const Tensor x_test = design(test, y_test);

  Tensor w = Tensor::parameter(Shape{D, C}, std::vector<double>(D * C, 0.0));
  Tensor b = Tensor::parameter(Shape{C}, std::vector<double>(C, 0.0));
  nn::ParameterList params{{"probe.weight", w}, {"probe.bias", b}};
  Adam adam(params);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  for (std::size_t step = 0; step < options.steps; ++step) {
    nn::zero_grads(params);
    Tape tape;
    TapeScope scope(tape);
    Tensor logits = ops::add_row_vector(ops::matmul(x_train, w), b);
    Tensor loss = ops::scale(ops::sum(ops::pick(ops::log_softmax(logits), y_train)), -inv_n);
    tape.backward(loss);
    adam.step(options.lr);
  }
  NoGradScope no_grad;
  ProbeResult r;
  r.classes = distinct.size();
  r.train_size = train.size();
  r.test_size = test.size();
  r.train_accuracy = accuracy(ops::add_row_vector(ops::matmul(x_train, w), b), y_train);
  r.test_accuracy = accuracy(ops::add_row_vector(ops::matmul(x_test, w), b), y_test);
  return r;
}

std::vector<std::vector<double>> pooled_features(const LutModel& model,
                                                 std::span<const Utterance> utts,
                                                 ProbeLayer layer) {
  NoGradScope no_grad;
  std::vector<std::vector<double>> out;
  out.reserve(utts.size());
  for (const auto& u : utts) {
    const EncoderOutputs enc = model.encode(u.features);
    const Tensor pooled = ops::mean_rows(layer == ProbeLayer::kAcoustic ? enc.h_ae : enc.h_se);
    out.emplace_back(pooled.data());
  }
  return out;
}

std::vector<int> probe_labels(std::span<const Utterance> utts, ProbeTask task) {
  std::vector<int> out;
  out.reserve(utts.size());
  for (const auto& u : utts) out.push_back(task == ProbeTask::kSpeaker ? u.speaker_id : u.intent_id);
  return out;
}

}  // namespace lut
