// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlm/tensor.hpp"
#include "mlm/tokenizer.hpp"

namespace mlm {

// Encoder dimensions. The hidden size is always num_heads * head_size.
struct ModelConfig {
  size_t num_layers = 2;
  size_t num_heads = 4;
  size_t head_size = 16;
  size_t ffn_size = 128;
  size_t vocab_size = kDefaultVocabSize;
  size_t max_positions = 64;
  double dropout = 0.1;
  double attn_dropout = 0.1;
  // Size of the token-classification head; 0 when the model has none.
  size_t num_labels = 0;

  size_t hidden() const { return num_heads * head_size; }
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStddev = 0.02;

template <typename T>
struct LayerParams {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> ln1_g, ln1_b;
  Matrix<T> w1, b1, w2, b2;
  Matrix<T> ln2_g, ln2_b;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

template <typename T>
struct TensorRef {
  std::string name;
  Matrix<T>* tensor;
  bool decay;  // false for biases and layer-norm parameters
};

template <typename T>
struct ConstTensorRef {
  std::string name;
  const Matrix<T>* tensor;
  bool decay;
};

// All learnable tensors. The MLM decoder reuses tok_emb (tied weights); the
// classifier tensors are empty until a tagging head is attached.
template <typename T>
struct Params {
  Matrix<T> tok_emb, pos_emb;
  std::vector<LayerParams<T>> layers;
  Matrix<T> head_w, head_b, head_ln_g, head_ln_b, head_bias;
  Matrix<T> cls_w, cls_b;

  // Stable, named enumeration used by the optimizer, checkpoints and tests.
  std::vector<TensorRef<T>> refs();
  std::vector<ConstTensorRef<T>> refs() const;

  // Same shapes, all zeros.
  Params zeros_like() const;
  bool has_classifier() const { return !cls_w.empty(); }

  friend bool operator==(const Params&, const Params&) = default;
};

template <typename To, typename From>
Params<To> cast_params(const Params<From>& p);

// Correctly shaped tensors, every value zero (including layer-norm scales).
template <typename T>
Params<T> zero_params(const ModelConfig& config);

// Weights ~ Normal(0, 0.02^2) truncated at +-2 sigma, biases 0, layer-norm
// scales 1. Deterministic in seed; each tensor draws from its own stream.
template <typename T>
Params<T> init_params(const ModelConfig& config, uint64_t seed);

// Adds (or replaces) a freshly initialised classifier of num_labels outputs.
template <typename T>
void attach_classifier(Params<T>& params, ModelConfig& config, size_t num_labels, uint64_t seed);

enum class Mode { kTrain, kEval };

// Token ids for `rows` sequences of `seq_len` positions. Row r has real
// tokens at [0, lengths[r]) and padding after; padded keys get exactly zero
// attention weight.
struct BatchView {
  size_t rows = 0;
  size_t seq_len = 0;
  std::span<const TokenId> ids;
  std::span<const size_t> lengths;
};

enum class Head { kMlm, kTagger };

template <typename T>
struct LayerNormCache {
  Matrix<T> xhat;
  std::vector<T> rstd;
};

template <typename T>
struct LayerCache {
  Matrix<T> x;           // layer input
  Matrix<T> q, k, v;     // projections, rows x hidden
  Matrix<T> probs;       // rows*heads x seq_len softmax weights, before dropout
  Matrix<T> probs_drop;  // dropout scale per weight; empty when inactive
  Matrix<T> ctx;
  Matrix<T> attn_drop;
  LayerNormCache<T> ln1;
  Matrix<T> y1, ffn_pre, ffn_act;
  Matrix<T> ffn_drop;
  LayerNormCache<T> ln2;
};

// Everything backward needs from a train-mode forward pass.
template <typename T>
struct ForwardCache {
  Head head = Head::kMlm;
  size_t rows = 0;
  size_t seq_len = 0;
  std::vector<TokenId> ids;
  std::vector<size_t> lengths;
  Matrix<T> emb_drop;
  std::vector<LayerCache<T>> layers;
  Matrix<T> final_hidden;
  // MLM head
  Matrix<T> head_pre, head_act, head_out;
  LayerNormCache<T> head_ln;
  // tagging head
  Matrix<T> cls_drop, cls_in;
};

// Returns (rows*seq_len) x vocab logits. Throws DataError for ids >= V and
// NumericError("numerical overflow at layer k") on non-finite activations.
// Dropout is active only in train mode and is keyed by dropout_seed.
template <typename T>
Matrix<T> forward(const Params<T>& params, const ModelConfig& config, const BatchView& batch,
                  Mode mode, uint64_t dropout_seed, ForwardCache<T>* cache = nullptr);

// Returns (rows*seq_len) x num_labels logits from the classifier head.
template <typename T>
Matrix<T> tag_forward(const Params<T>& params, const ModelConfig& config, const BatchView& batch,
                      Mode mode, uint64_t dropout_seed, ForwardCache<T>* cache = nullptr);

// Gradients of the loss whose logit-gradient is d_logits, for the head the
// cache was produced with. Tensors not on the path (the other head) are zero.
template <typename T>
Params<T> backward(const Params<T>& params, const ModelConfig& config,
                   const ForwardCache<T>& cache, const Matrix<T>& d_logits);

template <typename T>
struct LossResult {
  double loss = 0.0;
  size_t count = 0;
  Matrix<T> d_logits;
};

// Mean cross-entropy over positions whose label is not kIgnoreLabel, and
// its gradient with respect to the logits. Throws DataError("no masked
// tokens in batch") when every label is ignored.
template <typename T>
LossResult<T> masked_cross_entropy(const Matrix<T>& logits, std::span<const int32_t> labels);

template <typename T>
LossResult<T> mlm_loss(const Matrix<T>& logits, std::span<const int32_t> labels) {
  return masked_cross_entropy(logits, labels);
}

// Building blocks, exposed for the property tests.
template <typename T>
void layer_norm_forward(const Matrix<T>& x, const Matrix<T>& gamma, const Matrix<T>& beta,
                        Matrix<T>& y, LayerNormCache<T>& cache);

// Row-wise softmax over the first `valid` columns of each row; the remaining
// columns are set to exactly zero.
template <typename T>
void masked_softmax_row(T* row, size_t n, size_t valid);

double gelu(double x);
double gelu_grad(double x);

}  // namespace mlm
