#include "lut/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lut/error.hpp"
#include "lut/ops.hpp"

namespace lut {

namespace {

std::size_t meta_size(const Checkpoint& c, const std::string& key) {
  auto it = c.metadata.find(key);
  if (it == c.metadata.end()) throw FormatError("teacher checkpoint lacks metadata '" + key + "'");
  return static_cast<std::size_t>(std::stoull(it->second));
}

}  // namespace

TeacherModel::TeacherModel(std::size_t vocab_size, int unk, const TeacherConfig& config)
    : config_(config), mode_(TeacherMode::kTrained), vocab_size_(vocab_size), unk_(unk) {
  if (vocab_size == 0) throw ConfigError("teacher vocabulary is empty");
  if (config.layers == 0) throw ConfigError("trained teacher needs at least one layer");
  if (config.supervision_layer > config.layers) {
    throw ConfigError("teacher supervision layer " + std::to_string(config.supervision_layer) +
                      " exceeds " + std::to_string(config.layers) + " layers");
  }
  std::mt19937_64 rng(config.seed);
  const std::size_t d = config.d_model;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  token_table_ = nn::normal_parameter(Shape{vocab_size, d}, emb_std, rng);
  cls_ = nn::normal_parameter(Shape{1, d}, emb_std, rng);
  mask_token_ = nn::normal_parameter(Shape{1, d}, emb_std, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    layers_.emplace_back(d, config.heads, config.d_ff, rng);
  }
  output_ = nn::Linear(d, vocab_size, rng);
}

TeacherModel TeacherModel::table_mode(const Vocab& vocab, std::size_t d_model,
                                      std::uint64_t seed) {
  TeacherModel t;
  t.mode_ = TeacherMode::kTable;
  t.config_.d_model = d_model;
  t.config_.layers = 0;
  t.config_.seed = seed;
  t.vocab_size_ = vocab.size();
  t.unk_ = vocab.unk();
  std::mt19937_64 rng(seed);
  t.token_table_ = nn::normal_parameter(Shape{vocab.size(), d_model}, 1.0, rng);
  t.frozen_ = true;
  return t;
}

std::vector<int> TeacherModel::clean(std::span<const int> z) const {
  std::vector<int> ids(z.begin(), z.end());
  for (int& id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) id = unk_;
  }
  return ids;
}

std::size_t TeacherModel::depth() const {
  return config_.supervision_layer == 0 ? layers_.size() : config_.supervision_layer;
}

Tensor TeacherModel::encode(std::span<const int> ids, const std::vector<bool>* masked,
                            std::size_t depth) const {
  const std::size_t T = ids.size(), d = config_.d_model;
  Tensor x = ops::embedding(token_table_, ids);
  if (masked != nullptr) {
    if (masked->size() != T) throw DimensionError("mask length differs from the sentence");
    std::vector<double> keep(T * d), flag(T);
    for (std::size_t i = 0; i < T; ++i) {
      const double m = (*masked)[i] ? 1.0 : 0.0;
      flag[i] = m;
      std::fill_n(keep.begin() + static_cast<std::ptrdiff_t>(i * d), d, 1.0 - m);
    }
    x = ops::add(ops::mul(x, Tensor::matrix(T, d, keep)),
                 ops::matmul(Tensor::matrix(T, 1, flag), mask_token_));
  }
  const Tensor parts[] = {cls_, x};
  Tensor h = ops::scale(ops::concat_rows(parts), std::sqrt(static_cast<double>(d)));
  h = ops::add(h, nn::positional_encoding(T + 1, d));
  nn::ForwardContext ctx;
  for (std::size_t l = 0; l < depth; ++l) h = layers_[l].forward(h, ctx);
  return h;
}

TeacherEmbedding TeacherModel::embed(std::span<const int> z) const {
  if (z.empty()) throw EmptyInputError("teacher embedding of an empty transcription");
  NoGradScope no_grad;
  const std::vector<int> ids = clean(z);
  if (mode_ == TeacherMode::kTable) {
    Tensor rows = ops::embedding(token_table_, ids);
    return {ops::mean_rows(rows), rows};
  }
  Tensor h = encode(ids, nullptr, depth());
  return {ops::select_row(h, 0), ops::slice_rows(h, 1, ids.size())};
}

Tensor TeacherModel::masked_log_probs(std::span<const int> z,
                                      const std::vector<bool>& masked) const {
  if (mode_ == TeacherMode::kTable) throw UsageError("a table-mode teacher has no predictor");
  if (z.empty()) throw EmptyInputError("masked prediction of an empty sentence");
  const std::vector<int> ids = clean(z);
  Tensor h = encode(ids, &masked, layers_.size());
  return ops::log_softmax(output_.forward(ops::slice_rows(h, 1, ids.size())));
}

std::optional<double> TeacherModel::train_step(const std::vector<std::vector<int>>& batch,
                                               Adam& optimizer, double lr,
                                               std::mt19937_64& rng) {
  if (frozen_) return std::nullopt;
  if (mode_ == TeacherMode::kTable) throw UsageError("a table-mode teacher cannot be trained");
  nn::ParameterList params = parameters();
  nn::zero_grads(params);
  std::bernoulli_distribution coin(config_.mask_prob);
  Tape tape;
  double value = 0.0;
  {
    TapeScope scope(tape);
    std::vector<Tensor> losses;
    std::size_t masked_total = 0;
    for (const auto& sentence : batch) {
      if (sentence.empty()) continue;
      std::vector<bool> masked(sentence.size());
      bool any = false;
      for (std::size_t i = 0; i < masked.size(); ++i) any |= (masked[i] = coin(rng));
      if (!any) {
        std::uniform_int_distribution<std::size_t> pos(0, sentence.size() - 1);
        masked[pos(rng)] = true;
      }
      std::vector<int> rows, targets;
      const std::vector<int> ids = clean(sentence);
      for (std::size_t i = 0; i < masked.size(); ++i) {
        if (!masked[i]) continue;
        rows.push_back(static_cast<int>(i));
        targets.push_back(ids[i]);
      }
      Tensor lp = ops::embedding(masked_log_probs(ids, masked), rows);
      losses.push_back(ops::neg(ops::sum(ops::pick(lp, targets))));
      masked_total += rows.size();
    }
    if (losses.empty()) return 0.0;
    Tensor total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = ops::add(total, losses[i]);
    total = ops::scale(total, 1.0 / static_cast<double>(masked_total));
    value = total.item();
    tape.backward(total);
  }
  clip_grad_norm(params, 5.0);
  optimizer.step(lr);
  return value;
}

nn::ParameterList TeacherModel::parameters() const {
  nn::ParameterList out{{"teacher.token_table", token_table_}};
  if (mode_ == TeacherMode::kTable) return out;
  out.push_back({"teacher.cls", cls_});
  out.push_back({"teacher.mask", mask_token_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].collect("teacher.layer" + std::to_string(l), out);
  }
  output_.collect("teacher.output", out);
  return out;
}

Checkpoint TeacherModel::to_checkpoint() const {
  std::map<std::string, std::string> meta{
      {"kind", "teacher"},
      {"mode", mode_ == TeacherMode::kTable ? "table" : "trained"},
      {"d_model", std::to_string(config_.d_model)},
      {"heads", std::to_string(config_.heads)},
      {"layers", std::to_string(config_.layers)},
      {"d_ff", std::to_string(config_.d_ff)},
      {"vocab_size", std::to_string(vocab_size_)},
      {"unk", std::to_string(unk_)},
      {"supervision_layer", std::to_string(config_.supervision_layer)},
      {"seed", std::to_string(config_.seed)}};
  return snapshot(parameters(), std::move(meta));
}

TeacherModel TeacherModel::from_checkpoint(const Checkpoint& ckpt) {
  auto kind = ckpt.metadata.find("kind");
  if (kind == ckpt.metadata.end() || kind->second != "teacher") {
    throw FormatError("checkpoint is not tagged as a teacher");
  }
  TeacherConfig cfg;
  cfg.d_model = meta_size(ckpt, "d_model");
  cfg.heads = meta_size(ckpt, "heads");
  cfg.layers = meta_size(ckpt, "layers");
  cfg.d_ff = meta_size(ckpt, "d_ff");
  cfg.supervision_layer = meta_size(ckpt, "supervision_layer");
  cfg.seed = meta_size(ckpt, "seed");
  const std::size_t vocab = meta_size(ckpt, "vocab_size");
  const int unk = static_cast<int>(meta_size(ckpt, "unk"));
  TeacherModel t;
  if (ckpt.metadata.at("mode") == "table") {
    t.mode_ = TeacherMode::kTable;
    t.config_ = cfg;
    t.vocab_size_ = vocab;
    t.unk_ = unk;
    t.token_table_ = Tensor::parameter(Shape{vocab, cfg.d_model},
                                       std::vector<double>(vocab * cfg.d_model));
  } else {
    t = TeacherModel(vocab, unk, cfg);
  }
  nn::ParameterList params = t.parameters();
  restore(params, ckpt);
  t.frozen_ = true;
  return t;
}

double masked_accuracy(const TeacherModel& teacher,
                       const std::vector<std::vector<int>>& sentences) {
  NoGradScope no_grad;
  std::size_t correct = 0, total = 0;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::vector<bool> masked(s.size(), false);
      masked[i] = true;
      Tensor lp = teacher.masked_log_probs(s, masked);
      std::size_t best = 0;
      for (std::size_t c = 1; c < lp.cols(); ++c) {
        if (lp.at(i, c) > lp.at(i, best)) best = c;
      }
      correct += static_cast<int>(best) == s[i];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TeacherModel train_teacher(const std::vector<std::vector<int>>& sentences, const Vocab& vocab,
                           const TeacherConfig& config, TeacherReport* report) {
  std::vector<std::vector<int>> usable;
  for (const auto& s : sentences) {
    if (!s.empty()) usable.push_back(s);
  }
  if (usable.empty()) throw EmptyInputError("teacher training corpus is empty");
  TeacherModel teacher(vocab.size(), vocab.unk(), config);

  std::mt19937_64 rng(config.seed ^ 0x5bd1e995ull);
  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_heldout = static_cast<std::size_t>(
      std::floor(config.heldout_fraction * static_cast<double>(usable.size())));
  if (n_heldout >= usable.size()) n_heldout = 0;
  std::vector<std::vector<int>> heldout, train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_heldout ? heldout : train).push_back(usable[order[i]]);
  }

  Adam adam(teacher.parameters());
  const Schedule schedule{config.peak_lr, config.warmup_steps, 0.5,
                          std::max<std::size_t>(1, config.steps / 2)};
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  double last = 0.0;
  for (std::size_t step = 1; step <= config.steps; ++step) {
    std::vector<std::vector<int>> batch;
    for (std::size_t b = 0; b < config.batch_sentences; ++b) batch.push_back(train[pick(rng)]);
    last = *teacher.train_step(batch, adam, lr_at(step, schedule), rng);
  }
  teacher.freeze();
  if (report != nullptr) {
    report->steps = config.steps;
    report->final_loss = last;
    report->heldout_sentences = heldout.size();
    report->heldout_accuracy = masked_accuracy(teacher, heldout.empty() ? train : heldout);
  }
  return teacher;
}

}  // namespace lut
