#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "lcam/gradcheck.hpp"
#include "lcam/kernels.hpp"
#include "lcam/rng.hpp"
#include "lcam/tape.hpp"

namespace lcam {
namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t = Tensor::zeros(r, c);
  for (auto& v : t.mutable_values()) v = scale * rng.normal();
  return t;
}

TEST(Tensor, ShapeAndAccess) {
  const Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.row_values(0), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(t.item(), DimensionError);
  EXPECT_EQ(Tensor::scalar(4).item(), 4.0);
}

TEST(Tensor, FiniteCheck) {
  Tensor t = Tensor::zeros(1, 2);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Kernels, MatmulMatchesTripleLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(5), k = 1 + rng.below(5), n = 1 + rng.below(5);
    const Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
    const Tensor c = kernels::matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{m, n}));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double want = 0;
        for (std::size_t p = 0; p < k; ++p) want += a(i, p) * b(p, j);
        EXPECT_NEAR(c(i, j), want, 1e-12);
      }
    }
  }
}

TEST(Kernels, MatmulRejectsMismatch) {
  EXPECT_THROW(kernels::matmul(Tensor::zeros(2, 3), Tensor::zeros(2, 3)), DimensionError);
  EXPECT_THROW(kernels::add(Tensor::zeros(2, 3), Tensor::zeros(3, 2)), DimensionError);
  EXPECT_THROW(kernels::add_rows(Tensor::zeros(2, 3), Tensor::zeros(1, 2)), DimensionError);
  EXPECT_THROW(kernels::slice_cols(Tensor::zeros(2, 3), 2, 2), DimensionError);
  EXPECT_THROW(kernels::select_row(Tensor::zeros(2, 3), 2), DimensionError);
}

TEST(Kernels, DimensionErrorNamesShapes) {
  try {
    kernels::matmul(Tensor::zeros(2, 3), Tensor::zeros(4, 5));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
    EXPECT_NE(msg.find("4"), std::string::npos);
  }
}

TEST(Kernels, SoftmaxTwoElements) {
  const auto p = kernels::softmax(std::vector<double>{1.0, 0.0});
  EXPECT_NEAR(p[0], 0.731059, 1e-6);
  EXPECT_NEAR(p[1], 0.268941, 1e-6);
}

TEST(Kernels, SoftmaxRowsStableAndNormalised) {
  const Tensor s = kernels::softmax_rows(Tensor::from_rows({{1000, 0, -1000}, {3, 3, 3}}));
  EXPECT_TRUE(s.all_finite());
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(s(1, c), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(kernels::softmax(std::vector<double>{}), DimensionError);
}

TEST(Kernels, CrossEntropyByHand) {
  const Tensor logits = Tensor::from_rows({{2, 1, 0}, {0, 0, 0}});
  const std::vector<std::size_t> targets = {0, 2};
  const double row0 = -std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(1.0) + 1.0));
  EXPECT_NEAR(kernels::cross_entropy(logits, targets).item(), row0 + std::log(3.0), 1e-12);
  const std::vector<std::size_t> bad = {0, 3};
  EXPECT_THROW(kernels::cross_entropy(logits, bad), DimensionError);
}

TEST(Kernels, BceWithLogitsMatchesNaiveForm) {
  Rng rng(5);
  const Tensor logits = random_tensor(1, 6, rng, 3.0);
  Tensor targets = Tensor::zeros(1, 6);
  targets[1] = targets[4] = 1;
  double want = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits[i]));
    want -= targets[i] * std::log(p) + (1 - targets[i]) * std::log(1 - p);
  }
  EXPECT_NEAR(kernels::bce_with_logits(logits, targets).item(), want, 1e-10);
  const Tensor big = kernels::bce_with_logits(Tensor::row({800, -800}), Tensor::row({0, 1}));
  EXPECT_NEAR(big.item(), 1600.0, 1e-9);
}

TEST(Kernels, MeanRowsConcatAndSlice) {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 6}});
  EXPECT_EQ(kernels::mean_rows(a), Tensor::row({2, 4}));
  const Tensor b = Tensor::row({7, 8});
  const Tensor* rows[] = {&a, &b};
  EXPECT_EQ(kernels::concat_rows(rows), Tensor::from_rows({{1, 2}, {3, 6}, {7, 8}}));
  const Tensor* cols[] = {&a, &a};
  EXPECT_EQ(kernels::slice_cols(kernels::concat_cols(cols), 1, 2), Tensor::from_rows({{2, 1}, {6, 3}}));
}

TEST(Tape, HandDerivedGradients) {
  Tape tape;
  const Var x = tape.leaf(Tensor::row({1, 2, 3}));
  const Var y = tape.leaf(Tensor::row({4, 5, 6}));
  const Var loss = sum(mul(x, y));
  EXPECT_EQ(loss.value().item(), 32.0);
  const Gradients g = tape.backward(loss);
  EXPECT_EQ(g[x], Tensor::row({4, 5, 6}));
  EXPECT_EQ(g[y], Tensor::row({1, 2, 3}));
}

TEST(Tape, MatmulGradientIsOuterProductWithUpstream) {
  Tape tape;
  const Tensor av = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor bv = Tensor::from_rows({{5, 6}, {7, 8}});
  const Var a = tape.leaf(av), b = tape.leaf(bv);
  const Gradients g = tape.backward(sum(matmul(a, b)));
  // dL/dA = 1 B^T, dL/dB = A^T 1
  EXPECT_EQ(g[a], Tensor::from_rows({{11, 15}, {11, 15}}));
  EXPECT_EQ(g[b], Tensor::from_rows({{4, 4}, {6, 6}}));
}

TEST(Tape, SharedNodeAccumulates) {
  Tape tape;
  const Var x = tape.leaf(Tensor::scalar(3));
  const Var loss = sum(add(mul(x, x), x));
  EXPECT_EQ(tape.backward(loss)[x].item(), 7.0);
}

TEST(Tape, UnreachedLeafGetsZeros) {
  Tape tape;
  const Var x = tape.leaf(Tensor::row({1, 2}));
  const Var unused = tape.leaf(Tensor::from_rows({{1, 1}, {1, 1}}));
  const Gradients g = tape.backward(sum(x));
  EXPECT_EQ(g[unused], Tensor::zeros(2, 2));
}

TEST(Tape, ConstantsHaveNoGradient) {
  Tape tape;
  const Var c = tape.constant(Tensor::row({1, 2}));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_FALSE(sum(c).requires_grad());
}

TEST(Tape, BackwardNeedsScalar) {
  Tape tape;
  const Var x = tape.leaf(Tensor::row({1, 2}));
  EXPECT_THROW(tape.backward(x), DimensionError);
}

TEST(Tape, ReplayReproducesForwardValues) {
  Rng rng(11);
  Tape tape;
  const Var a = tape.leaf(random_tensor(3, 4, rng));
  const Var w = tape.leaf(random_tensor(4, 2, rng));
  const Var h = softmax_rows(tanh(matmul(a, w)));
  const std::vector<std::size_t> t = {0, 1, 1};
  cross_entropy(h, t);
  EXPECT_TRUE(tape.replay_matches());
}

// Every differentiable op, checked against central differences.
TEST(GradCheck, EveryOpAgreesWithFiniteDifferences) {
  Rng rng(21);
  const std::vector<Tensor> params = {random_tensor(3, 4, rng), random_tensor(4, 3, rng), random_tensor(1, 4, rng),
                                      random_tensor(3, 4, rng)};
  Tensor mask = Tensor::zeros(3, 4);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = (i % 3 == 0) ? 0.0 : 1.5;
  Tensor targets = Tensor::zeros(1, 3);
  targets[1] = 1;
  const LossBuilder f = [&](Tape&, std::span<const Var> p) {
    const Var a = p[0], b = p[1], row = p[2], c = p[3];
    const Var m = matmul(a, b);                               // 3 x 3
    const Var s = softmax_rows(m);                            // 3 x 3
    const Var t = tanh(add_rows(mul(a, c), row));             // 3 x 4
    const Var u = sigmoid(scale(dropout(t, mask), 0.7));      // 3 x 4
    const Var parts[] = {u, transpose(b)};                    // 6 x 4
    const Var v = concat_rows(parts);
    const Var cols[] = {slice_cols(v, 1, 2), mean_rows(v) + select_row(v, 4)};
    const Var w = concat_rows(std::vector<Var>{cols[0], slice_cols(cols[1], 0, 2)});
    const Var wide[] = {s, s};
    const Var ce = cross_entropy(concat_cols(wide), {0, 4, 5});
    const Var bce = bce_with_logits(slice_cols(select_row(m, 2), 0, 3), targets);
    return sum(add(add(sum(w), ce), bce));
  };
  const GradCheckResult r = finite_difference_check(f, params);
  EXPECT_LT(r.max_relative_error, 1e-6);
  EXPECT_EQ(r.entries, 12u + 12u + 4u + 12u);
  EXPECT_EQ(r.per_param.size(), 4u);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A builder whose value changes in a way the tape does not see.
  const std::vector<Tensor> params = {Tensor::row({0.5, -0.25})};
  const LossBuilder f = [](Tape& tape, std::span<const Var> p) {
    const double hidden = p[0].value()[0] * p[0].value()[0];
    return add(sum(p[0]), tape.constant(Tensor::scalar(hidden)));
  };
  EXPECT_GT(finite_difference_check(f, params).max_relative_error, 0.1);
}

TEST(GradCheck, NonFiniteLossThrows) {
  const std::vector<Tensor> params = {Tensor::row({1.0})};
  const LossBuilder f = [](Tape& tape, std::span<const Var> p) {
    return add(sum(p[0]), tape.constant(Tensor::scalar(std::nan(""))));
  };
  EXPECT_THROW(finite_difference_check(f, params), std::domain_error);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(1);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 50u);
  EXPECT_NE(v[0] + 1000 * v[1], 0 + 1000 * 1);
}

TEST(Rng, MixSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 10; ++a) {
    for (std::uint64_t b = 0; b < 10; ++b) {
      for (std::uint64_t c = 0; c < 4; ++c) seen.insert(mix_seed(a, b, c));
    }
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(mix_seed(1, 2, 3), mix_seed(1, 2, 3));
}

}  // namespace
}  // namespace lcam
