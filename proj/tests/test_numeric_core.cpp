#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "lut/checkpoint.hpp"
#include "lut/error.hpp"
#include "lut/grad_check.hpp"
#include "lut/nn.hpp"
#include "lut/ops.hpp"
#include "oracles.hpp"

using namespace lut;

namespace {

// Runs a one-output function through the gradient checker.
void expect_grad_ok(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                    int line = __builtin_LINE()) {
  INFO("called from line " << line);
  GradCheckReport report;
  REQUIRE_NOTHROW(report = grad_check(f, point));
  INFO("max relative error " << report.max_relative_error);
  CHECK(report.passed());
}

Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  // A fixed random linear functional keeps every output coordinate in play.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> w(t.size());
  for (double& x : w) x = d(rng);
  return ops::sum(ops::mul(t, Tensor(t.shape(), w)));
}

}  // namespace

TEST_CASE("matmul agrees with the triple-loop oracle") {
  std::mt19937_64 rng(3);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {2, 3, 4}, {5, 7, 3}, {16, 9, 11}}) {
    Tensor a = oracle::random_matrix(m, k, rng), b = oracle::random_matrix(k, n, rng);
    const auto expected = oracle::matmul(a.data(), b.data(), m, k, n);
    const Tensor c = ops::matmul(a, b);
    REQUIRE(c.shape() == Shape{static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(c.at(i) == doctest::Approx(expected[i]).epsilon(1e-12));
    const Tensor ct = ops::matmul_nt(a, ops::transpose(b));
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(ct.at(i) == doctest::Approx(expected[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(ops::matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3})), DimensionError);
}

TEST_CASE("softmax matches the closed form and rows sum to one") {
  std::mt19937_64 rng(5);
  Tensor x = oracle::random_matrix(4, 6, rng, 3.0);
  Tensor p = ops::softmax(x);
  Tensor lp = ops::log_softmax(x);
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> row(x.data().begin() + r * 6, x.data().begin() + (r + 1) * 6);
    const auto ref = oracle::softmax_row(row);
    double total = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(p.at(r, c) == doctest::Approx(ref[c]).epsilon(1e-12));
      CHECK(std::exp(lp.at(r, c)) == doctest::Approx(ref[c]).epsilon(1e-12));
      total += p.at(r, c);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  // Column-wise normalization.
  Tensor pc = ops::softmax(x, 0);
  for (std::size_t c = 0; c < 6; ++c) {
    double total = 0.0;
    for (std::size_t r = 0; r < 4; ++r) total += pc.at(r, c);
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax is shift invariant and rejects non-finite input") {
  Tensor x = Tensor::vector({1.0, 2.0, -3.0});
  Tensor y = ops::add_scalar(x, 1000.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ops::softmax(x).at(i) == doctest::Approx(ops::softmax(y).at(i)));
  CHECK_THROWS_AS(ops::softmax(Tensor::vector({1.0, NAN})), NumericError);
  CHECK_THROWS_AS(ops::softmax(Tensor::vector({1.0, INFINITY})), NumericError);
  CHECK_THROWS_AS(ops::softmax(Tensor::vector({-INFINITY, -INFINITY})), NumericError);
  // -inf entries are fine as long as one value is finite.
  CHECK(ops::softmax(Tensor::vector({0.0, -INFINITY})).at(0) == 1.0);
}

TEST_CASE("layer_norm matches a per-row oracle") {
  std::mt19937_64 rng(11);
  Tensor x = oracle::random_matrix(3, 5, rng, 2.0);
  Tensor g = Tensor::vector({1.0, 2.0, 0.5, -1.0, 1.5});
  Tensor b = Tensor::vector({0.0, 0.1, 0.2, 0.3, 0.4});
  Tensor y = ops::layer_norm(x, g, b, 1e-5);
  for (std::size_t r = 0; r < 3; ++r) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < 5; ++c) mu += x.at(r, c) / 5;
    for (std::size_t c = 0; c < 5; ++c) var += (x.at(r, c) - mu) * (x.at(r, c) - mu) / 5;
    for (std::size_t c = 0; c < 5; ++c) {
      const double ref = g.at(c) * (x.at(r, c) - mu) / std::sqrt(var + 1e-5) + b.at(c);
      CHECK(y.at(r, c) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d matches a direct convolution oracle") {
  std::mt19937_64 rng(13);
  Tensor x = oracle::random_matrix(5, 8, rng);
  Tensor w(Shape{2, 3, 3});
  for (double& v : w.mutable_values()) v = std::normal_distribution<double>()(rng);
  Tensor b = Tensor::vector({0.5, -0.25});
  ops::ConvGeometry geo{1, 2, 1, 1};
  Tensor y = ops::conv2d(x, w, b, geo);
  REQUIRE(y.shape() == Shape{5, 8});  // 2 channels x 4 strided features
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t f = 0; f < 4; ++f) {
        double ref = b.at(c);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            const int ti = static_cast<int>(t) + i - 1, fj = static_cast<int>(2 * f) + j - 1;
            if (ti < 0 || ti >= 5 || fj < 0 || fj >= 8) continue;
            ref += w.at((c * 3 + i) * 3 + j) * x.at(ti, fj);
          }
        CHECK(y.at(t, c * 4 + f) == doctest::Approx(ref).epsilon(1e-12));
      }
}

TEST_CASE("finite differences agree with every differentiable op") {
  std::mt19937_64 rng(17);
  Tensor a = oracle::random_matrix(3, 4, rng), b = oracle::random_matrix(4, 2, rng);
  Tensor c = oracle::random_matrix(3, 4, rng), v = Tensor::vector({0.3, -1.0, 0.7, 2.0});
  const int idx[] = {2, 0, 3, 3, 1};
  const int rows[] = {1, 0, 1};
  const int picks[] = {3, 0, 2};

  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::matmul(p, b), 1); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::matmul(a, p), 2); }, b);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::matmul_nt(p, c), 3); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::transpose(p), 4); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::mul(p, ops::sub(p, c)), 5); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::add_row_vector(c, p), 6); }, v);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::relu(ops::add_scalar(p, 0.05)), 7); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::logaddexp(p, c), 8); }, a);
  expect_grad_ok([&](const Tensor& p) { return ops::mean(ops::scale(ops::neg(p), 3.0)); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::mean_rows(p), 9); }, a);
  expect_grad_ok([&](const Tensor& p) { return ops::mse(p, c); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::softmax(p), 10); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::softmax(p, 0), 11); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::log_softmax(p), 12); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::layer_norm(p, v, v), 13); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::layer_norm(c, p, v), 14); }, v);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::embedding(p, rows), 15); }, c);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::gather(p, idx), 16); }, v);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::pick(p, picks), 17); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::select_row(p, 1), 18); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::slice_rows(p, 1, 2), 19); }, a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::slice_cols(p, 1, 2), 20); }, a);
  expect_grad_ok(
      [&](const Tensor& p) {
        const Tensor parts[] = {p, c, p};
        return weighted_sum(ops::concat_rows(parts), 21);
      },
      a);
  expect_grad_ok(
      [&](const Tensor& p) {
        const Tensor parts[] = {c, p};
        return weighted_sum(ops::concat_cols(parts), 22);
      },
      a);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::shift(p, 2, -1.0), 23); }, v);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::reshape(p, Shape{4, 3}), 24); }, a);

  Tensor x = oracle::random_matrix(4, 6, rng);
  Tensor w(Shape{2, 3, 3});
  for (double& e : w.mutable_values()) e = std::normal_distribution<double>()(rng);
  Tensor bias = Tensor::vector({0.1, -0.2});
  ops::ConvGeometry geo{1, 2, 1, 1};
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::conv2d(p, w, bias, geo), 25); }, x);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::conv2d(x, p, bias, geo), 26); }, w);
  expect_grad_ok([&](const Tensor& p) { return weighted_sum(ops::conv2d(x, w, p, geo), 27); }, bias);
}

TEST_CASE("logaddexp has zero gradient where both inputs are -inf") {
  Tape tape;
  TapeScope scope(tape);
  Tensor a = Tensor::parameter(Shape{2}, {-INFINITY, 0.0});
  Tensor b = Tensor::parameter(Shape{2}, {-INFINITY, 0.0});
  Tensor y = ops::logaddexp(a, b);
  CHECK(y.at(0) == -INFINITY);
  CHECK(y.at(1) == doctest::Approx(std::log(2.0)));
  backward(ops::sum(ops::gather(y, std::vector<int>{1})));
  CHECK(a.grad()[0] == 0.0);
  CHECK(a.grad()[1] == doctest::Approx(0.5));
}

TEST_CASE("the gradient checker flags a corrupted gradient") {
  std::mt19937_64 rng(19);
  Tensor a = oracle::random_matrix(3, 3, rng);
  Tape tape;
  Tensor p = Tensor::parameter(a.shape(), a.data());
  {
    TapeScope scope(tape);
    tape.backward(ops::sum(ops::mul(p, p)));
  }
  std::vector<double> analytic = p.grad();
  std::vector<double> numeric(analytic.size());
  for (std::size_t i = 0; i < numeric.size(); ++i) numeric[i] = 2.0 * a.at(i);
  CHECK(compare_gradients(analytic, numeric).passed());
  analytic[4] *= 1.01;
  const auto report = compare_gradients(analytic, numeric);
  CHECK_FALSE(report.passed());
  REQUIRE(report.flagged.size() == 1);
  CHECK(report.entries[report.flagged[0]].index == 4);
}

TEST_CASE("tape misuse is reported") {
  Tape tape;
  TapeScope scope(tape);
  Tensor p = Tensor::parameter(Shape{2}, {1.0, 2.0});
  CHECK_THROWS_AS(tape.backward(ops::scale(p, 2.0)), UsageError);  // not a scalar
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), UsageError);  // not taped
  {
    NoGradScope off;
    Tensor q = ops::scale(p, 2.0);
    CHECK_FALSE(q.requires_grad());
  }
}

TEST_CASE("gradients accumulate across uses of the same tensor") {
  Tape tape;
  TapeScope scope(tape);
  Tensor p = Tensor::parameter(Shape{}, {3.0});
  tape.backward(ops::add(ops::mul(p, p), ops::scale(p, 4.0)));
  CHECK(p.grad()[0] == doctest::Approx(10.0));
}

TEST_CASE("positional encoding table") {
  Tensor pe = nn::positional_encoding(4, 6);
  for (std::size_t c = 0; c < 6; ++c) CHECK(pe.at(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
  CHECK(pe.at(3, 2) == doctest::Approx(std::sin(3.0 / std::pow(10000.0, 2.0 / 6.0))));
  CHECK(pe.at(3, 3) == doctest::Approx(std::cos(3.0 / std::pow(10000.0, 2.0 / 6.0))));
}

TEST_CASE("scaled dot attention matches an explicit oracle and respects the causal mask") {
  std::mt19937_64 rng(23);
  Tensor q = oracle::random_matrix(3, 4, rng), k = oracle::random_matrix(5, 4, rng),
         v = oracle::random_matrix(5, 2, rng);
  Tensor weights;
  Tensor out = nn::scaled_dot_attention(q, k, v, 4, nullptr, &weights);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<double> s(5);
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t d = 0; d < 4; ++d) s[j] += q.at(i, d) * k.at(j, d);
      s[j] /= 2.0;
    }
    const auto p = oracle::softmax_row(s);
    for (std::size_t c = 0; c < 2; ++c) {
      double ref = 0;
      for (std::size_t j = 0; j < 5; ++j) ref += p[j] * v.at(j, c);
      CHECK(out.at(i, c) == doctest::Approx(ref).epsilon(1e-12));
    }
    for (std::size_t j = 0; j < 5; ++j) CHECK(weights.at(i, j) == doctest::Approx(p[j]));
  }
  Tensor mask = nn::causal_mask(3);
  Tensor sq = oracle::random_matrix(3, 4, rng);
  Tensor w2;
  nn::scaled_dot_attention(sq, sq, sq, 4, &mask, &w2);
  CHECK(w2.at(0, 1) == 0.0);
  CHECK(w2.at(1, 2) == 0.0);
  CHECK(w2.at(0, 0) == 1.0);
}

TEST_CASE("multi-head attention validates heads and stays convex in the values") {
  std::mt19937_64 rng(29);
  CHECK_THROWS_AS(nn::MultiHeadAttention(10, 3, rng), ConfigError);
  nn::MultiHeadAttention mha(8, 2, rng);
  Tensor q = oracle::random_matrix(2, 8, rng), kv = oracle::random_matrix(6, 8, rng);
  nn::AttentionRecorder rec;
  rec.prefix = "x";
  Tensor out = mha.forward(q, kv, nullptr, &rec);
  CHECK(out.shape() == Shape{2, 8});
  CHECK(rec.matrices.size() == 2);
  for (const auto& m : rec.matrices) {
    for (std::size_t r = 0; r < 2; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 6; ++c) s += m.tensor.at(r, c);
      CHECK(s == doctest::Approx(1.0));
    }
  }
  nn::ParameterList params;
  mha.collect("mha", params);
  CHECK(params.size() == 8);
}

TEST_CASE("encoder and decoder layers pass finite-difference checks") {
  std::mt19937_64 rng(31);
  nn::EncoderLayer enc(8, 2, 12, rng);
  nn::DecoderLayer dec(8, 2, 12, rng);
  Tensor x = oracle::random_matrix(4, 8, rng), y = oracle::random_matrix(3, 8, rng);
  Tensor mask = nn::causal_mask(3);
  nn::ParameterList params;
  enc.collect("enc", params);
  dec.collect("dec", params);
  nn::ForwardContext ctx;
  GradCheckOptions opts;
  opts.max_coords_per_tensor = 6;
  const auto report = grad_check(
      [&] { return weighted_sum(dec.forward(y, enc.forward(x, ctx), mask, ctx), 41); }, params,
      opts);
  for (std::size_t f : report.flagged) {
    const auto& e = report.entries[f];
    MESSAGE(e.tensor << "[" << e.index << "] analytic " << e.analytic << " numeric " << e.numeric);
  }
  INFO("max relative error " << report.max_relative_error);
  CHECK(report.passed());
}

TEST_CASE("dropout is the identity at rate zero and inverted otherwise") {
  std::mt19937_64 rng(37);
  Tensor x(Shape{1000}, 1.0);
  CHECK(ops::dropout(x, 0.0, rng).same_storage(x));
  Tensor y = ops::dropout(x, 0.5, rng);
  std::size_t zeros = 0;
  for (double v : y.values()) {
    CHECK((v == 0.0 || v == 2.0));
    zeros += v == 0.0;
  }
  CHECK(zeros > 400);
  CHECK(zeros < 600);
}

TEST_CASE("checkpoint round trip is bit-identical and averaging is elementwise") {
  std::mt19937_64 rng(43);
  nn::ParameterList params{{"a", oracle::random_parameter(Shape{3, 2}, rng)},
                           {"b", oracle::random_parameter(Shape{4}, rng)}};
  const auto path = std::filesystem::temp_directory_path() / "lut_test_ckpt.bin";
  Checkpoint ck = snapshot(params, {{"tag", "unit"}});
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.metadata.at("tag") == "unit");
  CHECK(checkpoint_hash(back) == checkpoint_hash(ck));
  for (std::size_t i = 0; i < 2; ++i) CHECK(back.tensors[i].tensor.data() == params[i].tensor.data());

  // K = 1 is the identity; w and -w average to zero; three checkpoints
  // average to sum / 3 regardless of order.
  CHECK(checkpoint_hash(average_checkpoints(std::vector<Checkpoint>{ck})) == checkpoint_hash(ck));
  Checkpoint negated = ck;
  negated.tensors[0].tensor = ck.tensors[0].tensor.clone();
  negated.tensors[1].tensor = ck.tensors[1].tensor.clone();
  for (auto& t : negated.tensors)
    for (double& v : t.tensor.mutable_values()) v = -v;
  const Checkpoint cancelled = average_checkpoints(std::vector<Checkpoint>{ck, negated});
  for (const auto& t : cancelled.tensors)
    for (double v : t.tensor.values()) CHECK(v == 0.0);
  std::vector<Checkpoint> three;
  for (int i = 0; i < 3; ++i) {
    nn::ParameterList p{{"a", oracle::random_parameter(Shape{3, 2}, rng)},
                        {"b", oracle::random_parameter(Shape{4}, rng)}};
    three.push_back(snapshot(p));
  }
  Checkpoint avg = average_checkpoints(three);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < avg.tensors[t].tensor.size(); ++i) {
      const double ref = (three[0].tensors[t].tensor.at(i) + three[1].tensors[t].tensor.at(i) +
                          three[2].tensors[t].tensor.at(i)) / 3.0;
      CHECK(avg.tensors[t].tensor.at(i) == doctest::Approx(ref).epsilon(1e-14));
    }
  Checkpoint reversed = average_checkpoints(std::vector<Checkpoint>{three[2], three[1], three[0]});
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < avg.tensors[t].tensor.size(); ++i)
      CHECK(reversed.tensors[t].tensor.at(i) == doctest::Approx(avg.tensors[t].tensor.at(i)).epsilon(1e-15));

  nn::ParameterList wrong{{"a", Tensor::parameter(Shape{2, 3}, std::vector<double>(6))}};
  CHECK_THROWS_AS(average_checkpoints(std::vector<Checkpoint>{ck, snapshot(wrong)}), DimensionError);
  CHECK_THROWS_AS(restore(wrong, ck), DimensionError);

  std::ofstream(path, std::ios::binary) << "NOTACKPT";
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
}
