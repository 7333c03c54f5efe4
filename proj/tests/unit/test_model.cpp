// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "mlm/databatch.hpp"
#include "mlm/error.hpp"
#include "mlm/model.hpp"
#include "mlm/rng.hpp"
#include "oracles.hpp"

namespace mlm {
namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.num_layers = 2;
  c.num_heads = 2;
  c.head_size = 4;  // H = 8
  c.ffn_size = 16;
  c.vocab_size = 11;
  c.max_positions = 6;
  return c;
}

struct Batch {
  std::vector<TokenId> ids;
  std::vector<size_t> lengths;
  size_t rows, T;
  BatchView view() const { return {rows, T, ids, lengths}; }
};

Batch random_batch(const ModelConfig& c, size_t rows, size_t T, uint64_t seed) {
  Batch b{std::vector<TokenId>(rows * T, 0), {}, rows, T};
  Rng rng(seed);
  for (size_t r = 0; r < rows; ++r) {
    const size_t len = r == 0 ? T : 2 + rng.below(T - 1);
    b.lengths.push_back(len);
    for (size_t t = 0; t < len; ++t) b.ids[r * T + t] = static_cast<TokenId>(1 + rng.below(c.vocab_size - 1));
  }
  return b;
}

std::vector<int32_t> random_labels(const Batch& b, size_t vocab, uint64_t seed) {
  std::vector<int32_t> labels(b.ids.size(), kIgnoreLabel);
  Rng rng(seed);
  for (size_t r = 0; r < b.rows; ++r) {
    for (size_t t = 0; t < b.lengths[r]; ++t) {
      if (rng.uniform() < 0.5) labels[r * b.T + t] = static_cast<int32_t>(rng.below(vocab));
    }
  }
  labels[0] = 1;
  return labels;
}

TEST(Init, DeterministicAndLayerNormScalesOne) {
  const ModelConfig c = tiny();
  EXPECT_TRUE(init_params<float>(c, 1) == init_params<float>(c, 1));
  EXPECT_FALSE(init_params<float>(c, 1) == init_params<float>(c, 2));
  const Params<float> p = init_params<float>(c, 1);
  for (const auto& r : p.refs()) {
    if (r.name.find("gamma") != std::string::npos) {
      for (float x : r.tensor->data) EXPECT_EQ(x, 1.0f);
    } else if (!r.decay) {
      for (float x : r.tensor->data) EXPECT_EQ(x, 0.0f);
    }
  }
}

TEST(Init, WeightStatistics) {
  ModelConfig c = tiny();
  c.vocab_size = 5000;
  c.num_heads = 4;
  c.head_size = 5;  // tok_emb holds 10^5 values
  const Params<double> p = init_params<double>(c, 3);
  ASSERT_EQ(p.tok_emb.data.size(), 100000u);
  double sum = 0, sq = 0;
  for (double x : p.tok_emb.data) {
    ASSERT_LE(std::abs(x), 2 * kInitStddev);
    sum += x;
    sq += x * x;
  }
  EXPECT_LE(std::abs(sum / 1e5), 0.001);
  EXPECT_NEAR(std::sqrt(sq / 1e5), kInitStddev * std::sqrt(0.774), 0.001);
}

TEST(Init, DecayFlagsAndNames) {
  const Params<float> p = init_params<float>(tiny(), 1);
  for (const auto& r : p.refs()) EXPECT_EQ(r.decay, oracle::decays(r.name)) << r.name;
  EXPECT_EQ(p.refs().front().name, "tok_emb");
}

TEST(Forward, ShapeAndDeterminism) {
  const ModelConfig c = tiny();
  const Params<float> p = init_params<float>(c, 1);
  const Batch b = random_batch(c, 3, 5, 2);
  const Matrix<float> a = forward(p, c, b.view(), Mode::kEval, 0);
  EXPECT_EQ(a.rows, 15u);
  EXPECT_EQ(a.cols, c.vocab_size);
  EXPECT_TRUE(a == forward(p, c, b.view(), Mode::kEval, 99));
  // Dropout makes train mode seed-dependent.
  EXPECT_TRUE(forward(p, c, b.view(), Mode::kTrain, 5) == forward(p, c, b.view(), Mode::kTrain, 5));
  EXPECT_FALSE(forward(p, c, b.view(), Mode::kTrain, 5) == forward(p, c, b.view(), Mode::kTrain, 6));
}

TEST(Forward, AttentionRowsSumToOneAndIgnorePadding) {
  const ModelConfig c = tiny();
  const Params<double> p = init_params<double>(c, 1);
  const Batch b = random_batch(c, 3, 6, 4);
  ForwardCache<double> cache;
  forward(p, c, b.view(), Mode::kTrain, 1, &cache);
  for (const auto& layer : cache.layers) {
    for (size_t row = 0; row < layer.probs.rows; ++row) {
      const size_t r = row / (c.num_heads * b.T);
      double sum = 0;
      for (size_t k = 0; k < b.T; ++k) {
        if (k >= b.lengths[r]) {
          EXPECT_EQ(layer.probs(row, k), 0.0);
        }
        sum += layer.probs(row, k);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Forward, PaddingContentDoesNotLeak) {
  const ModelConfig c = tiny();
  const Params<double> p = init_params<double>(c, 1);
  Batch a = random_batch(c, 2, 6, 5);
  Batch b = a;
  for (size_t t = a.lengths[1]; t < a.T; ++t) b.ids[a.T + t] = 7;
  const auto la = forward(p, c, a.view(), Mode::kEval, 0);
  const auto lb = forward(p, c, b.view(), Mode::kEval, 0);
  for (size_t t = 0; t < a.lengths[1]; ++t) {
    for (size_t v = 0; v < c.vocab_size; ++v) EXPECT_EQ(la(a.T + t, v), lb(a.T + t, v));
  }
  // Rows do not see each other.
  Batch single{std::vector<TokenId>(a.ids.begin() + 6, a.ids.end()), {a.lengths[1]}, 1, 6};
  const auto ls = forward(p, c, single.view(), Mode::kEval, 0);
  for (size_t t = 0; t < a.lengths[1]; ++t) {
    for (size_t v = 0; v < c.vocab_size; ++v) EXPECT_NEAR(ls(t, v), la(6 + t, v), 1e-12);
  }
}

TEST(Forward, DegenerateNetworkYieldsBias) {
  ModelConfig c;
  c.num_layers = 1;
  c.num_heads = 1;
  c.head_size = 4;
  c.ffn_size = 8;
  c.vocab_size = 7;
  c.max_positions = 8;
  Params<double> p = zero_params<double>(c);
  for (size_t v = 0; v < 7; ++v) p.head_bias.data[v] = 0.1 * static_cast<double>(v) - 0.2;
  const Batch b = random_batch(c, 2, 5, 6);
  const auto logits = forward(p, c, b.view(), Mode::kEval, 0);
  for (size_t i = 0; i < logits.rows; ++i) {
    for (size_t v = 0; v < 7; ++v) EXPECT_EQ(logits(i, v), p.head_bias.data[v]);
  }
}

TEST(Forward, Errors) {
  const ModelConfig c = tiny();
  Params<float> p = init_params<float>(c, 1);
  Batch b = random_batch(c, 1, 4, 1);
  b.ids[1] = 11;
  EXPECT_THROW(forward(p, c, b.view(), Mode::kEval, 0), DataError);
  const Batch too_long = random_batch(c, 1, 7, 1);
  EXPECT_THROW(forward(p, c, too_long.view(), Mode::kEval, 0), DataError);
  const Batch ok = random_batch(c, 1, 4, 1);
  for (float& x : p.layers[0].w1.data) x = 3e38f;
  EXPECT_THROW(forward(p, c, ok.view(), Mode::kEval, 0), NumericError);
}

TEST(Loss, UniformLogitsGiveLogV) {
  Matrix<double> logits(4, 50);
  std::fill(logits.data.begin(), logits.data.end(), -3.25);
  const std::vector<int32_t> labels{3, kIgnoreLabel, 49, 0};
  const auto r = masked_cross_entropy(logits, labels);
  EXPECT_NEAR(r.loss, std::log(50.0), 1e-12);
  EXPECT_EQ(r.count, 3u);
}

TEST(Loss, HandComputedThreeClass) {
  Matrix<double> logits(1, 3);
  logits.data = {1, 2, 3};
  const auto r = masked_cross_entropy(logits, std::vector<int32_t>{2});
  EXPECT_NEAR(r.loss, 0.40760596444438, 1e-10);
  // Gradient is softmax minus one-hot.
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(r.d_logits.data[0], std::exp(1.0) / z, 1e-12);
  EXPECT_NEAR(r.d_logits.data[2], std::exp(3.0) / z - 1.0, 1e-12);
}

TEST(Loss, LargeMarginApproachesZero) {
  Matrix<double> logits(1, 5);
  logits.data = {0, 0, 80, 0, 0};
  EXPECT_LT(masked_cross_entropy(logits, std::vector<int32_t>{2}).loss, 1e-30);
}

TEST(Loss, NothingMasked) {
  Matrix<float> logits(2, 3);
  EXPECT_THROW(masked_cross_entropy(logits, std::vector<int32_t>{kIgnoreLabel, kIgnoreLabel}), DataError);
}

TEST(Backward, FiniteDifferencesEveryCoordinate) {
  const ModelConfig c = tiny();
  Params<double> p = init_params<double>(c, 8);
  Rng noise(9);
  for (auto& r : p.refs()) {
    for (double& x : r.tensor->data) x += (r.decay ? 0.1 : 0.2) * noise.normal();
  }
  const Batch b = random_batch(c, 2, 6, 10);
  const auto labels = random_labels(b, c.vocab_size, 11);
  ForwardCache<double> cache;
  const auto loss = masked_cross_entropy(forward(p, c, b.view(), Mode::kTrain, 12, &cache), labels);
  const Params<double> g = backward(p, c, cache, loss.d_logits);
  auto f = [&] { return masked_cross_entropy(forward(p, c, b.view(), Mode::kTrain, 12), labels).loss; };
  auto all = [](size_t, const Matrix<double>& m, const Matrix<double>&) {
    std::vector<size_t> idx(m.data.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  };
  for (const auto& r : oracle::check_gradients(p, g, f, all, 1e-5)) {
    EXPECT_LE(r.worst, 1e-4) << r.tensor << " analytic " << r.analytic << " numeric " << r.numeric;
  }
}

TEST(Backward, TaggerHeadFiniteDifferences) {
  ModelConfig c = tiny();
  Params<double> p = init_params<double>(c, 8);
  attach_classifier(p, c, 4, 13);
  const Batch b = random_batch(c, 2, 6, 14);
  const auto labels = random_labels(b, 4, 15);
  ForwardCache<double> cache;
  const auto loss = masked_cross_entropy(tag_forward(p, c, b.view(), Mode::kTrain, 16, &cache), labels);
  const Params<double> g = backward(p, c, cache, loss.d_logits);
  EXPECT_TRUE(std::all_of(g.head_w.data.begin(), g.head_w.data.end(), [](double x) { return x == 0; }));
  auto f = [&] { return masked_cross_entropy(tag_forward(p, c, b.view(), Mode::kTrain, 16), labels).loss; };
  auto all = [](size_t, const Matrix<double>& m, const Matrix<double>&) {
    std::vector<size_t> idx(m.data.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  };
  for (const auto& r : oracle::check_gradients(p, g, f, all, 1e-5)) {
    EXPECT_LE(r.worst, 1e-4) << r.tensor;
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGrads) {
  ModelConfig c = tiny();
  Params<double> p = init_params<double>(c, 1);
  attach_classifier(p, c, 3, 2);
  const Batch b = random_batch(c, 2, 5, 3);
  ForwardCache<double> cache;
  const auto logits = forward(p, c, b.view(), Mode::kTrain, 1, &cache);
  Matrix<double> zero(logits.rows, logits.cols);
  const Params<double> g = backward(p, c, cache, zero);
  for (const auto& r : g.refs()) {
    for (double x : r.tensor->data) ASSERT_EQ(x, 0.0) << r.name;
  }
}

TEST(Backward, PretrainingLeavesClassifierUntouched) {
  ModelConfig c = tiny();
  Params<double> p = init_params<double>(c, 1);
  attach_classifier(p, c, 3, 2);
  const Batch b = random_batch(c, 2, 5, 3);
  ForwardCache<double> cache;
  const auto loss = masked_cross_entropy(forward(p, c, b.view(), Mode::kTrain, 1, &cache),
                                         random_labels(b, c.vocab_size, 4));
  const Params<double> g = backward(p, c, cache, loss.d_logits);
  for (double x : g.cls_w.data) EXPECT_EQ(x, 0.0);
  for (double x : g.cls_b.data) EXPECT_EQ(x, 0.0);
}

TEST(Tagger, ShapeAndBiasOnlyHead) {
  ModelConfig c = tiny();
  Params<double> p = zero_params<double>(c);
  EXPECT_THROW(tag_forward(p, c, random_batch(c, 1, 3, 1).view(), Mode::kEval, 0), DataError);
  attach_classifier(p, c, 5, 1);
  EXPECT_EQ(c.num_labels, 5u);
  std::fill(p.cls_w.data.begin(), p.cls_w.data.end(), 0.0);
  p.cls_b.data = {0.5, -1, 2, 0, 3};
  const Batch b = random_batch(c, 2, 4, 2);
  const auto logits = tag_forward(p, c, b.view(), Mode::kEval, 0);
  ASSERT_EQ(logits.rows, 8u);
  ASSERT_EQ(logits.cols, 5u);
  for (size_t i = 0; i < 8; ++i) {
    for (size_t k = 0; k < 5; ++k) EXPECT_EQ(logits(i, k), p.cls_b.data[k]);
  }
}

TEST(Blocks, GeluValues) {
  EXPECT_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  for (double x : {-3.0, -0.5, 0.2, 1.7}) {
    EXPECT_NEAR(gelu_grad(x), (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6, 1e-8);
  }
}

TEST(Blocks, LayerNormStandardises) {
  Matrix<double> x(3, 6), gamma(1, 6), beta(1, 6), y;
  Rng rng(1);
  for (double& v : x.data) v = 5 + 3 * rng.normal();
  std::fill(gamma.data.begin(), gamma.data.end(), 1.0);
  LayerNormCache<double> cache;
  layer_norm_forward(x, gamma, beta, y, cache);
  for (size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (size_t k = 0; k < 6; ++k) mean += y(r, k) / 6;
    for (size_t k = 0; k < 6; ++k) var += (y(r, k) - mean) * (y(r, k) - mean) / 6;
    EXPECT_NEAR(mean, 0, 1e-12);
    EXPECT_NEAR(var, 1, 1e-4);  // eps keeps it slightly below 1
  }
}

TEST(Blocks, MaskedSoftmax) {
  std::vector<double> row{1, 2, 3, 100, -5};
  masked_softmax_row(row.data(), 5, 3);
  EXPECT_NEAR(row[0] + row[1] + row[2], 1.0, 1e-15);
  EXPECT_EQ(row[3], 0.0);
  EXPECT_EQ(row[4], 0.0);
}

TEST(Params, CastRoundTrip) {
  const Params<float> p = init_params<float>(tiny(), 4);
  EXPECT_TRUE((cast_params<float, double>(cast_params<double, float>(p)) == p));
}

TEST(Config, Validation) {
  ModelConfig c = tiny();
  EXPECT_NO_THROW(c.validate());
  c.max_positions = 3;
  EXPECT_THROW(c.validate(), DataError);
  c = tiny();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), DataError);
  c = tiny();
  c.num_heads = 0;
  EXPECT_THROW(c.validate(), DataError);
}

}  // namespace
}  // namespace mlm
