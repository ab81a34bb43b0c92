#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "doctest.h"
#include "lut/decode.hpp"
#include "lut/error.hpp"
#include "lut/grad_check.hpp"
#include "lut/model.hpp"
#include "lut/ops.hpp"
#include "lut/optim.hpp"
#include "oracles.hpp"

using namespace lut;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_ae = 1;
  c.n_se = 1;
  c.n_td = 1;
  c.d_model = 16;
  c.heads = 2;
  c.d_ff = 24;
  c.feature_dim = 4;
  c.source_classes = 6;
  c.target_vocab = 8;
  c.dropout = 0.0;
  c.init_seed = 5;
  return c;
}

// Handle sharing storage with the model's parameter.
Tensor param(const LutModel& m, const std::string& name) {
  for (auto& p : m.parameters()) {
    if (p.name == name) return p.tensor;
  }
  FAIL("no parameter " << name);
  return {};
}

Utterance make_utterance(std::size_t frames, std::vector<int> z, std::vector<int> y,
                         std::size_t feature_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Utterance u;
  u.id = "u";
  u.features = oracle::random_matrix(frames, feature_dim, rng);
  u.z = std::move(z);
  u.y = std::move(y);
  return u;
}

TeacherEmbedding random_teacher(std::size_t t_z, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TeacherEmbedding e;
  e.per_token = oracle::random_matrix(t_z, d, rng);
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < t_z; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += e.per_token.at(i, j) / double(t_z);
  e.h_c = Tensor::vector(mean);
  return e;
}

void set_values(Tensor t, const std::vector<double>& v) {
  REQUIRE(v.size() == t.size());
  std::copy(v.begin(), v.end(), t.mutable_values().begin());
}

std::vector<double> identity(std::size_t d) {
  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;
  return v;
}

// Direct single-channel-input convolution with zero padding, channel-major
// output, followed by per-row layer norm and a time average.
std::vector<double> seq_branch_oracle(const Tensor& x, const Tensor& w, const Tensor& b,
                                      const Tensor& gain, const Tensor& beta, std::size_t stride,
                                      double eps) {
  const std::size_t T = x.rows(), D = x.cols();
  const std::size_t C = w.shape()[0], KT = w.shape()[1], KF = w.shape()[2];
  const long pt = long(KT / 2), pf = long(KF / 2);
  const std::size_t fout = (D + 2 * std::size_t(pf) - KF) / stride + 1;
  std::vector<double> pooled(C * fout, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> row(C * fout, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < fout; ++j) {
        double s = b.at(c);
        for (std::size_t a = 0; a < KT; ++a) {
          for (std::size_t q = 0; q < KF; ++q) {
            const long tt = long(t) + long(a) - pt;
            const long ff = long(j * stride) + long(q) - pf;
            if (tt < 0 || tt >= long(T) || ff < 0 || ff >= long(D)) continue;
            s += w.at((c * KT + a) * KF + q) * x.at(std::size_t(tt), std::size_t(ff));
          }
        }
        row[c * fout + j] = s;
      }
    }
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v / double(row.size());
    for (double v : row) var += (v - mean) * (v - mean) / double(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
      pooled[k] += ((row[k] - mean) / std::sqrt(var + eps) * gain.at(k) + beta.at(k)) / double(T);
    }
  }
  return pooled;
}

double total_loss(const LutModel& m, const Utterance& u, const TeacherEmbedding* t,
                  LossWeights w, StepKind kind = StepKind::kFull) {
  return m.utterance_loss(u, t, kind, w).total.item();
}

}  // namespace

TEST_CASE("acoustic encoder shapes, CTC rows and empty input") {
  const ModelConfig c = tiny_config();
  LutModel m(c);
  std::mt19937_64 rng(1);
  for (std::size_t T : {1u, 5u, 17u}) {
    auto [h, lp] = m.acoustic_encode(oracle::random_matrix(T, c.feature_dim, rng));
    CHECK(h.shape() == Shape{T, c.d_model});
    CHECK(lp.shape() == Shape{T, c.source_classes});
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < c.source_classes; ++k) s += std::exp(lp.at(t, k));
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    Tensor h_se = m.semantic_encode(h);
    CHECK(h_se.shape() == h.shape());
  }
  CHECK_THROWS_AS(m.acoustic_encode(Tensor(Shape{0, c.feature_dim})), EmptyInputError);
  CHECK_THROWS_AS(m.acoustic_encode(Tensor(Shape{3, c.feature_dim + 1})), DimensionError);
}

TEST_CASE("with no acoustic layers h_ae is the positionally encoded projection") {
  ModelConfig c = tiny_config();
  c.n_ae = 0;
  LutModel m(c);
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_matrix(7, c.feature_dim, rng);
  const Tensor h = m.acoustic_encode(x).first;
  const std::vector<double> wv = param(m, "acoustic.input.weight").data();
  const std::vector<double> bv = param(m, "acoustic.input.bias").data();
  const auto proj = oracle::matmul(x.data(), wv, 7, c.feature_dim, c.d_model);
  for (std::size_t t = 0; t < 7; ++t) {
    for (std::size_t i = 0; i < c.d_model; ++i) {
      const double expo = double(2 * (i / 2)) / double(c.d_model);
      const double angle = double(t) / std::pow(10000.0, expo);
      const double pe = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
      CHECK(h.at(t, i) == doctest::Approx(proj[t * c.d_model + i] + bv[i] + pe).epsilon(1e-12));
    }
  }
}

TEST_CASE("semantic encoding is deterministic and downstream losses reach the acoustic encoder") {
  const ModelConfig c = tiny_config();
  LutModel m(c);
  const Utterance u = make_utterance(9, {2, 3, 4}, {4, 5}, c.feature_dim, 3);
  const auto e1 = m.encode(u.features), e2 = m.encode(u.features);
  CHECK(e1.h_se.data() == e2.h_se.data());

  auto params = m.parameters();
  nn::zero_grads(params);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(m.utterance_loss(u, nullptr, StepKind::kFull, {0.0, 0.0, 1.0}).total);
  }
  double acoustic_norm = 0.0;
  for (auto& p : m.parameters("acoustic")) {
    if (p.name.rfind("acoustic.ctc", 0) == 0 || !p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) acoustic_norm += g * g;
  }
  CHECK(acoustic_norm > 0.0);
}

TEST_CASE("seq branch matches a conv, norm and pooling oracle") {
  ModelConfig c = tiny_config();
  c.branch = BranchMode::kSeqLevel;
  LutModel m(c);
  std::mt19937_64 rng(4);
  set_values(param(m, "branch.conv.bias"), {0.3, -0.2});
  set_values(param(m, "branch.seq_norm.gain"), oracle::random_matrix(1, 16, rng).data());
  set_values(param(m, "branch.seq_norm.bias"), oracle::random_matrix(1, 16, rng).data());
  const Tensor x = oracle::random_matrix(6, c.d_model, rng);
  const Tensor v0 = m.seq_branch(x);
  CHECK(v0.shape() == Shape{c.d_model});
  const auto expected =
      seq_branch_oracle(x, param(m, "branch.conv.weight"), param(m, "branch.conv.bias"),
                        param(m, "branch.seq_norm.gain"), param(m, "branch.seq_norm.bias"),
                        c.conv_stride_feature, 1e-5);
  for (std::size_t i = 0; i < c.d_model; ++i) CHECK(v0.at(i) == doctest::Approx(expected[i]));
}

TEST_CASE("seq branch pooling is the identity on constant input and permutation invariant "
          "with a time kernel of one") {
  ModelConfig c = tiny_config();
  c.branch = BranchMode::kSeqLevel;
  c.conv_kernel_time = 1;
  LutModel m(c);
  std::mt19937_64 rng(5);
  const Tensor row = oracle::random_matrix(1, c.d_model, rng);
  std::vector<double> constant;
  for (int t = 0; t < 5; ++t) constant.insert(constant.end(), row.data().begin(), row.data().end());
  const Tensor v_const = m.seq_branch(Tensor::matrix(5, c.d_model, constant));
  const Tensor v_row = m.seq_branch(row);
  for (std::size_t i = 0; i < c.d_model; ++i) CHECK(v_const.at(i) == doctest::Approx(v_row.at(i)));

  const Tensor x = oracle::random_matrix(6, c.d_model, rng);
  std::vector<double> permuted;
  for (std::size_t t : {3u, 0u, 5u, 1u, 4u, 2u}) {
    permuted.insert(permuted.end(), x.data().begin() + long(t * c.d_model),
                    x.data().begin() + long((t + 1) * c.d_model));
  }
  const Tensor a = m.seq_branch(x), b = m.seq_branch(Tensor::matrix(6, c.d_model, permuted));
  for (std::size_t i = 0; i < c.d_model; ++i) CHECK(a.at(i) == doctest::Approx(b.at(i)));
}

TEST_CASE("word branch length law, convexity and single-head reduction") {
  ModelConfig c = tiny_config();
  c.heads = 1;
  LutModel m(c);
  const std::size_t d = c.d_model;
  for (const char* part : {"query", "key", "value", "output"}) {
    const std::string base = std::string("branch.word_attention.") + part;
    set_values(param(m, base + ".weight"), identity(d));
    set_values(param(m, base + ".bias"), std::vector<double>(d, 0.0));
  }
  std::mt19937_64 rng(6);
  for (std::size_t T_x : {4u, 11u}) {
    const Tensor h = oracle::random_matrix(T_x, d, rng);
    const Tensor q = oracle::random_matrix(3, d, rng);
    const Tensor v1 = m.word_branch(h, q);
    CHECK(v1.shape() == Shape{3, d});
    const Tensor expected = nn::scaled_dot_attention(q, h, h, d);
    for (std::size_t i = 0; i < v1.size(); ++i) {
      CHECK(v1.at(i) == doctest::Approx(expected.at(i)).epsilon(1e-12));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t t = 0; t < T_x; ++t) lo = std::min(lo, h.at(t, j)), hi = std::max(hi, h.at(t, j));
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(v1.at(i, j) >= lo - 1e-12);
        CHECK(v1.at(i, j) <= hi + 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(m.word_branch(oracle::random_matrix(4, d, rng), Tensor(Shape{0, d})),
                  EmptyInputError);
}

TEST_CASE("no gradient flows into the teacher vectors") {
  const ModelConfig c = tiny_config();
  LutModel m(c);
  std::mt19937_64 rng(7);
  Tensor q = oracle::random_parameter(Shape{3, c.d_model}, rng);
  const Tensor h = oracle::random_matrix(5, c.d_model, rng);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(ops::sum(m.word_branch(h, q)));
  }
  CHECK_FALSE(q.has_grad());
}

TEST_CASE("distance loss values and gradient") {
  std::mt19937_64 rng(8);
  TeacherEmbedding t = random_teacher(3, 4, 1);
  Tensor v = t.per_token.clone();
  CHECK(distance_loss(v, t, BranchMode::kWordLevel).item() == 0.0);
  Tensor off = ops::add_scalar(t.per_token, 1.0);
  CHECK(distance_loss(off, t, BranchMode::kWordLevel).item() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(distance_loss(ops::add_scalar(t.h_c, 1.0), t, BranchMode::kSeqLevel).item() ==
        doctest::Approx(1.0).epsilon(1e-14));

  Tensor p = oracle::random_parameter(Shape{3, 4}, rng);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(distance_loss(p, t, BranchMode::kWordLevel));
  }
  const auto g = p.grad();
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] == doctest::Approx(2.0 * (p.at(i) - t.per_token.at(i)) / 12.0));
  }
  const auto report = grad_check(
      [&](const Tensor& x) { return distance_loss(x, t, BranchMode::kWordLevel); }, p);
  CHECK(report.passed());
  CHECK_THROWS_AS(distance_loss(t.h_c, t, BranchMode::kWordLevel), DimensionError);
}

TEST_CASE("decoder is causal, normalized and validates its prefix") {
  const ModelConfig c = tiny_config();
  LutModel m(c);
  std::mt19937_64 rng(9);
  const Tensor h = oracle::random_matrix(6, c.d_model, rng);
  const std::vector<int> a{kTargetSos, 4, 5, 6, 7}, b{kTargetSos, 4, 5, 3, 3};
  const Tensor la = m.decode_forward(a, h), lb = m.decode_forward(b, h);
  CHECK(la.shape() == Shape{5, c.target_vocab});
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c.target_vocab; ++k) s += std::exp(la.at(i, k));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    for (std::size_t k = 0; k < c.target_vocab; ++k) {
      if (i < 3) CHECK(la.at(i, k) == lb.at(i, k));
    }
  }
  bool later_differs = false;
  for (std::size_t k = 0; k < c.target_vocab; ++k) later_differs |= la.at(3, k) != lb.at(3, k);
  CHECK(later_differs);

  const std::vector<int> no_sos{4, 5};
  CHECK_THROWS_AS(m.decode_forward(no_sos, h), UsageError);
  ModelConfig short_cfg = c;
  short_cfg.max_st_len = 3;
  LutModel s(short_cfg);
  CHECK_THROWS_AS(s.decode_forward(a, h), UsageError);
}

TEST_CASE("argmax is invariant to a constant logit shift") {
  std::mt19937_64 rng(10);
  const Tensor logits = oracle::random_matrix(4, 9, rng);
  const Tensor a = ops::log_softmax(logits), b = ops::log_softmax(ops::add_scalar(logits, 37.5));
  for (std::size_t r = 0; r < 4; ++r) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 1; k < 9; ++k) {
      if (a.at(r, k) > a.at(r, ia)) ia = k;
      if (b.at(r, k) > b.at(r, ib)) ib = k;
    }
    CHECK(ia == ib);
  }
}

TEST_CASE("translation loss: uniform bound, perfect prediction, hand NLL and padding") {
  const std::size_t V = 7;
  const Tensor uniform(Shape{3, V}, -std::log(double(V)));
  const std::vector<int> t3{4, 5, kTargetEos};
  CHECK(translation_loss(uniform, t3).item() == doctest::Approx(std::log(double(V))));

  std::vector<double> onehot(3 * V, -INFINITY);
  for (std::size_t i = 0; i < 3; ++i) onehot[i * V + std::size_t(t3[i])] = 0.0;
  CHECK(translation_loss(Tensor::matrix(3, V, onehot), t3).item() == 0.0);

  // Two-token vocabulary; id 0 doubles as pad, so the targets use id 1.
  const double p[3] = {0.7, 0.4, 0.9};
  std::vector<double> lp;
  for (double q : p) {
    lp.push_back(std::log(1.0 - q));
    lp.push_back(std::log(q));
  }
  const std::vector<int> ones{1, 1, 1};
  const double hand = -(std::log(0.7) + std::log(0.4) + std::log(0.9)) / 3.0;
  CHECK(translation_loss(Tensor::matrix(3, 2, lp), ones).item() == doctest::Approx(hand));
  const std::vector<int> padded{1, kTargetPad, 1};
  const double hand_pad = -(std::log(0.7) + std::log(0.9)) / 2.0;
  CHECK(translation_loss(Tensor::matrix(3, 2, lp), padded).item() == doctest::Approx(hand_pad));

  const double eps = 0.1;
  const double smooth = -(std::log(0.7) + std::log(0.3) + std::log(0.4) + std::log(0.6) +
                          std::log(0.9) + std::log(0.1)) / 6.0;
  CHECK(translation_loss(Tensor::matrix(3, 2, lp), ones, eps).item() ==
        doctest::Approx((1 - eps) * hand + eps * smooth));
  const std::vector<int> all_pad{0, 0, 0};
  CHECK_THROWS_AS(translation_loss(Tensor::matrix(3, 2, lp), all_pad), EmptyInputError);
}

TEST_CASE("total loss is a weighted sum: projection, linearity, auxiliary renormalization") {
  const ModelConfig c = tiny_config();
  LutModel m(c);
  const Utterance u = make_utterance(9, {2, 3, 4}, {4, 5}, c.feature_dim, 11);
  const TeacherEmbedding t = random_teacher(3, c.d_model, 2);
  const LossComponents parts = m.utterance_loss(u, &t, StepKind::kFull, {0.5, 0.05, 0.45});
  CHECK(parts.l_ae >= 0.0);
  CHECK(parts.l_se >= 0.0);
  REQUIRE(parts.l_td.has_value());
  CHECK(*parts.l_td >= 0.0);
  CHECK(parts.total.item() ==
        doctest::Approx(0.5 * parts.l_ae + 0.05 * parts.l_se + 0.45 * *parts.l_td));
  CHECK(total_loss(m, u, &t, {1, 0, 0}) == parts.l_ae);
  CHECK(total_loss(m, u, &t, {1.0, 0.1, 0.9}) ==
        doctest::Approx(2.0 * total_loss(m, u, &t, {0.5, 0.05, 0.45})).epsilon(1e-12));

  const LossComponents aux = m.utterance_loss(u, &t, StepKind::kAuxiliary, {0.5, 0.05, 0.45});
  CHECK_FALSE(aux.l_td.has_value());
  CHECK(aux.total.item() == doctest::Approx((0.5 * aux.l_ae + 0.05 * aux.l_se) / 0.55));

  const LossWeights defaults;
  CHECK(defaults.alpha == 0.5);
  CHECK(defaults.beta == 0.05);
  CHECK(defaults.gamma == 0.45);

  CHECK_THROWS_AS(m.utterance_loss(u, nullptr, StepKind::kFull, {0.5, 0.05, 0.45}), UsageError);
  Utterance asr = u;
  asr.y.reset();
  CHECK_THROWS_AS(m.utterance_loss(asr, &t, StepKind::kFull, {}), UsageError);
  CHECK_THROWS_AS(m.utterance_loss(u, &t, StepKind::kAuxiliary, {0, 0, 1}), ConfigError);
}

TEST_CASE("finite differences agree for every loss term and the weighted sum") {
  for (BranchMode mode : {BranchMode::kWordLevel, BranchMode::kSeqLevel}) {
    ModelConfig c = tiny_config();
    c.branch = mode;
    LutModel m(c);
    const Utterance u = make_utterance(8, {2, 3, 5}, {4, 6}, c.feature_dim, 12);
    const TeacherEmbedding t = random_teacher(3, c.d_model, 3);
    for (LossWeights w : {LossWeights{1, 0, 0}, LossWeights{0, 1, 0}, LossWeights{0, 0, 1},
                          LossWeights{0.5, 0.05, 0.45}}) {
      INFO("branch " << to_string(mode) << " weights " << w.alpha << "/" << w.beta << "/"
                     << w.gamma);
      auto params = m.parameters();
      GradCheckOptions opts;
      opts.max_coords_per_tensor = 3;
      opts.seed = 7;
      const auto report = grad_check(
          [&] { return m.utterance_loss(u, &t, StepKind::kFull, w).total; }, params, opts);
      for (std::size_t f : report.flagged) {
        const auto& e = report.entries[f];
        MESSAGE(e.tensor << "[" << e.index << "] " << e.analytic << " vs " << e.numeric);
      }
      CHECK(report.passed());
    }
  }
}

TEST_CASE("overfitting one pair drives teacher-forced argmax to the reference") {
  ModelConfig c = tiny_config();
  LutModel m(c);
  const Utterance u = make_utterance(12, {2, 3, 4, 5}, {7, 4, 6, 5}, c.feature_dim, 13);
  auto params = m.parameters();
  Adam adam(params);
  for (int step = 0; step < 200; ++step) {
    nn::zero_grads(params);
    Tape tape;
    TapeScope scope(tape);
    tape.backward(m.utterance_loss(u, nullptr, StepKind::kFull, {0.0, 0.0, 1.0}).total);
    adam.step(3e-3);
  }
  const Tensor h_se = m.encode(u.features).h_se;
  const Tensor lp = m.decode_forward(decoder_input(*u.y), h_se);
  const std::vector<int> target = decoder_target(*u.y);
  for (std::size_t i = 0; i < target.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c.target_vocab; ++k) {
      if (lp.at(i, k) > lp.at(i, best)) best = k;
    }
    CHECK(int(best) == target[i]);
  }
  CHECK(greedy_translate(m, u.features) == *u.y);
}

TEST_CASE("inference ignores the branches") {
  const ModelConfig c = tiny_config();
  LutModel full(c), bare(c, false);
  CHECK(bare.parameters("branch").empty());
  std::mt19937_64 rng(14);
  for (int i = 0; i < 5; ++i) {
    const Tensor x = oracle::random_matrix(9, c.feature_dim, rng);
    CHECK(greedy_translate(full, x, 6) == greedy_translate(bare, x, 6));
    BeamOptions opts;
    opts.beam = 3;
    opts.max_len = 6;
    const Hypothesis a = beam_search(full, x, opts), b = beam_search(bare, x, opts);
    CHECK(a.tokens == b.tokens);
    CHECK(a.log_prob == b.log_prob);
  }
  LutModel loaded(c, false);
  CHECK_NOTHROW(loaded.load(full.to_checkpoint()));
  CHECK_THROWS_AS(bare.seq_branch(oracle::random_matrix(3, c.d_model, rng)), UsageError);
}

TEST_CASE("checkpoints carry an architecture hash") {
  const ModelConfig c = tiny_config();
  LutModel a(c);
  ModelConfig c2 = c;
  c2.init_seed = 99;
  c2.weights = {1, 1, 1};
  c2.dropout = 0.3;
  CHECK(c.hash() == c2.hash());
  LutModel b(c2);
  b.load(a.to_checkpoint());
  std::mt19937_64 rng(15);
  const Tensor x = oracle::random_matrix(6, c.feature_dim, rng);
  CHECK(a.encode(x).h_se.data() == b.encode(x).h_se.data());

  ModelConfig c3 = c;
  c3.n_se = 2;
  CHECK(c3.hash() != c.hash());
  LutModel other(c3);
  CHECK_THROWS_AS(other.load(a.to_checkpoint()), HashMismatchError);
}

TEST_CASE("config validation") {
  ModelConfig c = tiny_config();
  c.weights.beta = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny_config();
  c.conv_stride_feature = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(tiny_config().validate());
  CHECK(parse_branch_mode("seq") == BranchMode::kSeqLevel);
  CHECK(parse_branch_mode("word") == BranchMode::kWordLevel);
  CHECK_THROWS_AS(parse_branch_mode("both"), ConfigError);
}

TEST_CASE("every layer allocation constructs and trains") {
  const Utterance u = make_utterance(9, {2, 3, 4}, {4, 5}, 4, 16);
  const TeacherEmbedding t = random_teacher(3, 16, 4);
  for (auto [ae, se] : {std::pair{2, 6}, {3, 5}, {4, 4}, {5, 3}, {6, 2}}) {
    ModelConfig c = tiny_config();
    c.n_ae = std::size_t(ae);
    c.n_se = std::size_t(se);
    LutModel m(c);
    auto params = m.parameters();
    CHECK(params.size() == m.parameters().size());
    Adam adam(params);
    const double before = total_loss(m, u, &t, {});
    for (int step = 0; step < 10; ++step) {
      nn::zero_grads(params);
      Tape tape;
      TapeScope scope(tape);
      tape.backward(m.utterance_loss(u, &t, StepKind::kFull, {}).total);
      adam.step(1e-3);
    }
    const double after = total_loss(m, u, &t, {});
    INFO("layers " << ae << "/" << se);
    CHECK(std::isfinite(after));
    CHECK(after < before);
  }
}
