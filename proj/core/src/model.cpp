// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/model.hpp"

#include <cmath>
#include <numbers>

#include "mlm/databatch.hpp"
#include "mlm/error.hpp"
#include "mlm/rng.hpp"

namespace mlm {

void ModelConfig::validate() const {
  if (num_layers == 0 || num_heads == 0 || head_size == 0 || ffn_size == 0 || vocab_size == 0) {
    throw DataError("model dimensions must be positive");
  }
  if (max_positions < 4) throw DataError("max_positions must be at least 4");
  if (!(dropout >= 0 && dropout < 1) || !(attn_dropout >= 0 && attn_dropout < 1)) {
    throw DataError("dropout rates must lie in [0, 1)");
  }
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <typename P, typename R>
void collect_refs(P& p, std::vector<R>& out) {
  auto add = [&](std::string name, auto& t, bool decay) { out.push_back({std::move(name), &t, decay}); };
  add("tok_emb", p.tok_emb, true);
  add("pos_emb", p.pos_emb, true);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "attn.wq", layer.wq, true);
    add(pre + "attn.bq", layer.bq, false);
    add(pre + "attn.wk", layer.wk, true);
    add(pre + "attn.bk", layer.bk, false);
    add(pre + "attn.wv", layer.wv, true);
    add(pre + "attn.bv", layer.bv, false);
    add(pre + "attn.wo", layer.wo, true);
    add(pre + "attn.bo", layer.bo, false);
    add(pre + "ln1.gamma", layer.ln1_g, false);
    add(pre + "ln1.beta", layer.ln1_b, false);
    add(pre + "ffn.w1", layer.w1, true);
    add(pre + "ffn.b1", layer.b1, false);
    add(pre + "ffn.w2", layer.w2, true);
    add(pre + "ffn.b2", layer.b2, false);
    add(pre + "ln2.gamma", layer.ln2_g, false);
    add(pre + "ln2.beta", layer.ln2_b, false);
  }
  add("mlm_head.dense.w", p.head_w, true);
  add("mlm_head.dense.b", p.head_b, false);
  add("mlm_head.ln.gamma", p.head_ln_g, false);
  add("mlm_head.ln.beta", p.head_ln_b, false);
  add("mlm_head.bias", p.head_bias, false);
  if (!p.cls_w.empty()) {
    add("classifier.w", p.cls_w, true);
    add("classifier.b", p.cls_b, false);
  }
}

}  // namespace

template <typename T>
std::vector<TensorRef<T>> Params<T>::refs() {
  std::vector<TensorRef<T>> out;
  collect_refs(*this, out);
  return out;
}

template <typename T>
std::vector<ConstTensorRef<T>> Params<T>::refs() const {
  std::vector<ConstTensorRef<T>> out;
  collect_refs(*this, out);
  return out;
}

template <typename T>
Params<T> Params<T>::zeros_like() const {
  Params<T> z = *this;
  for (auto& r : z.refs()) r.tensor->zero();
  return z;
}

template <typename To, typename From>
Params<To> cast_params(const Params<From>& p) {
  Params<To> out;
  out.layers.resize(p.layers.size());
  auto src = p.refs();
  if (p.has_classifier()) {
    out.cls_w = Matrix<To>(1, 1);
    out.cls_b = Matrix<To>(1, 1);
  }
  auto dst = out.refs();
  for (size_t i = 0; i < src.size(); ++i) {
    Matrix<To>& d = *dst[i].tensor;
    const Matrix<From>& s = *src[i].tensor;
    d = Matrix<To>(s.rows, s.cols);
    for (size_t j = 0; j < s.size(); ++j) d.data[j] = static_cast<To>(s.data[j]);
  }
  return out;
}

namespace {

template <typename T>
Matrix<T> normal_matrix(size_t rows, size_t cols, uint64_t seed, uint64_t stream) {
  Matrix<T> m(rows, cols);
  Rng rng = Rng::for_key({seed, stream});
  for (auto& v : m.data) v = static_cast<T>(rng.truncated_normal(kInitStddev));
  return m;
}

}  // namespace

template <typename T>
Params<T> zero_params(const ModelConfig& config) {
  config.validate();
  const size_t h = config.hidden();
  const size_t f = config.ffn_size;
  Params<T> p;
  p.tok_emb = Matrix<T>(config.vocab_size, h);
  p.pos_emb = Matrix<T>(config.max_positions, h);
  p.layers.resize(config.num_layers);
  for (auto& l : p.layers) {
    l.wq = Matrix<T>(h, h); l.bq = Matrix<T>(1, h);
    l.wk = Matrix<T>(h, h); l.bk = Matrix<T>(1, h);
    l.wv = Matrix<T>(h, h); l.bv = Matrix<T>(1, h);
    l.wo = Matrix<T>(h, h); l.bo = Matrix<T>(1, h);
    l.ln1_g = Matrix<T>(1, h); l.ln1_b = Matrix<T>(1, h);
    l.w1 = Matrix<T>(h, f); l.b1 = Matrix<T>(1, f);
    l.w2 = Matrix<T>(f, h); l.b2 = Matrix<T>(1, h);
    l.ln2_g = Matrix<T>(1, h); l.ln2_b = Matrix<T>(1, h);
  }
  p.head_w = Matrix<T>(h, h);
  p.head_b = Matrix<T>(1, h);
  p.head_ln_g = Matrix<T>(1, h);
  p.head_ln_b = Matrix<T>(1, h);
  p.head_bias = Matrix<T>(1, config.vocab_size);
  if (config.num_labels > 0) {
    p.cls_w = Matrix<T>(h, config.num_labels);
    p.cls_b = Matrix<T>(1, config.num_labels);
  }
  return p;
}

template <typename T>
Params<T> init_params(const ModelConfig& config, uint64_t seed) {
  ModelConfig body = config;
  body.num_labels = 0;
  Params<T> p = zero_params<T>(body);
  std::fill(p.head_ln_g.data.begin(), p.head_ln_g.data.end(), T(1));
  for (auto& l : p.layers) {
    std::fill(l.ln1_g.data.begin(), l.ln1_g.data.end(), T(1));
    std::fill(l.ln2_g.data.begin(), l.ln2_g.data.end(), T(1));
  }

  uint64_t stream = 0;
  for (auto& r : p.refs()) {
    ++stream;
    if (!r.decay) continue;
    *r.tensor = normal_matrix<T>(r.tensor->rows, r.tensor->cols, seed, stream);
  }
  if (config.num_labels > 0) {
    ModelConfig c = config;
    attach_classifier(p, c, config.num_labels, seed);
  }
  return p;
}

template <typename T>
void attach_classifier(Params<T>& params, ModelConfig& config, size_t num_labels, uint64_t seed) {
  if (num_labels == 0) throw DataError("classifier needs at least one label");
  config.num_labels = num_labels;
  constexpr uint64_t kClassifierStream = 0xC1A55ULL;
  params.cls_w = normal_matrix<T>(config.hidden(), num_labels, seed, kClassifierStream);
  params.cls_b = Matrix<T>(1, num_labels);
}

// ---------------------------------------------------------------------------
// Building blocks

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

template <typename T>
void layer_norm_forward(const Matrix<T>& x, const Matrix<T>& gamma, const Matrix<T>& beta,
                        Matrix<T>& y, LayerNormCache<T>& cache) {
  const size_t n = x.cols;
  y = Matrix<T>(x.rows, n);
  cache.xhat = Matrix<T>(x.rows, n);
  cache.rstd.assign(x.rows, T(0));
  for (size_t i = 0; i < x.rows; ++i) {
    const T* xi = x.row(i);
    T mean = 0;
    for (size_t j = 0; j < n; ++j) mean += xi[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (size_t j = 0; j < n; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<T>(n);
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    cache.rstd[i] = rstd;
    T* hi = cache.xhat.row(i);
    T* yi = y.row(i);
    for (size_t j = 0; j < n; ++j) {
      hi[j] = (xi[j] - mean) * rstd;
      yi[j] = hi[j] * gamma.data[j] + beta.data[j];
    }
  }
}

template <typename T>
void masked_softmax_row(T* row, size_t n, size_t valid) {
  if (valid == 0) {
    std::fill(row, row + n, T(0));
    return;
  }
  T max = row[0];
  for (size_t j = 1; j < valid; ++j) max = std::max(max, row[j]);
  T sum = 0;
  for (size_t j = 0; j < valid; ++j) {
    row[j] = std::exp(row[j] - max);
    sum += row[j];
  }
  for (size_t j = 0; j < valid; ++j) row[j] /= sum;
  std::fill(row + valid, row + n, T(0));
}

namespace {

enum DropoutSite : uint64_t {
  kSiteEmbedding = 1,
  kSiteAttnProbs = 2,
  kSiteAttnOut = 3,
  kSiteFfnOut = 4,
  kSiteClassifier = 5,
};

// Inverted dropout scale factors (0 or 1/(1-p)); empty when inactive.
template <typename T>
Matrix<T> dropout_mask(size_t rows, size_t cols, double p, Mode mode, uint64_t seed,
                       uint64_t site, uint64_t layer) {
  if (mode != Mode::kTrain || p <= 0.0) return {};
  Matrix<T> m(rows, cols);
  Rng rng = Rng::for_key({seed, site, layer});
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  for (auto& v : m.data) v = rng.uniform() < p ? T(0) : scale;
  return m;
}

template <typename T>
void apply_mask(Matrix<T>& x, const Matrix<T>& mask) {
  if (mask.empty()) return;
  for (size_t i = 0; i < x.size(); ++i) x.data[i] *= mask.data[i];
}

template <typename T>
void check_finite(const Matrix<T>& x, size_t layer) {
  if (!all_finite<T>(x.span())) {
    throw NumericError("numerical overflow at layer " + std::to_string(layer));
  }
}

template <typename T>
Matrix<T> linear(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& b) {
  Matrix<T> y;
  matmul(x, w, y);
  add_row_bias(y, b);
  return y;
}

template <typename T>
void layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& gamma, const LayerNormCache<T>& c,
                         Matrix<T>& dx, Matrix<T>& dgamma, Matrix<T>& dbeta) {
  const size_t n = dy.cols;
  dx = Matrix<T>(dy.rows, n);
  std::vector<T> dxhat(n);
  for (size_t i = 0; i < dy.rows; ++i) {
    const T* dyi = dy.row(i);
    const T* hi = c.xhat.row(i);
    T mean_d = 0, mean_dh = 0;
    for (size_t j = 0; j < n; ++j) {
      dgamma.data[j] += dyi[j] * hi[j];
      dbeta.data[j] += dyi[j];
      dxhat[j] = dyi[j] * gamma.data[j];
      mean_d += dxhat[j];
      mean_dh += dxhat[j] * hi[j];
    }
    mean_d /= static_cast<T>(n);
    mean_dh /= static_cast<T>(n);
    T* dxi = dx.row(i);
    for (size_t j = 0; j < n; ++j) dxi[j] = c.rstd[i] * (dxhat[j] - mean_d - hi[j] * mean_dh);
  }
}

template <typename T>
Matrix<T> gelu_matrix(const Matrix<T>& x) {
  Matrix<T> y(x.rows, x.cols);
  for (size_t i = 0; i < x.size(); ++i) y.data[i] = static_cast<T>(gelu(x.data[i]));
  return y;
}

template <typename T>
void validate_batch(const ModelConfig& config, const BatchView& batch) {
  if (batch.ids.size() != batch.rows * batch.seq_len || batch.lengths.size() != batch.rows) {
    throw DataError("batch shape does not match its ids/lengths");
  }
  if (batch.seq_len == 0 || batch.seq_len > config.max_positions) {
    throw DataError("sequence length exceeds max_positions");
  }
  for (size_t len : batch.lengths) {
    if (len > batch.seq_len) throw DataError("attention length exceeds sequence length");
  }
  for (TokenId id : batch.ids) {
    if (id >= config.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(config.vocab_size));
    }
  }
}

// Embeddings plus all encoder layers; returns the final hidden states.
template <typename T>
Matrix<T> encode(const Params<T>& p, const ModelConfig& config, const BatchView& batch, Mode mode,
                 uint64_t seed, ForwardCache<T>* cache) {
  validate_batch<T>(config, batch);
  const size_t rows = batch.rows * batch.seq_len;
  const size_t hid = config.hidden();
  const size_t heads = config.num_heads;
  const size_t dh = config.head_size;
  const size_t tlen = batch.seq_len;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Matrix<T> x(rows, hid);
  for (size_t n = 0; n < rows; ++n) {
    const T* e = p.tok_emb.row(batch.ids[n]);
    const T* pe = p.pos_emb.row(n % tlen);
    T* xn = x.row(n);
    for (size_t j = 0; j < hid; ++j) xn[j] = e[j] + pe[j];
  }
  Matrix<T> emb_drop = dropout_mask<T>(rows, hid, config.dropout, mode, seed, kSiteEmbedding, 0);
  apply_mask(x, emb_drop);
  check_finite(x, 0);

  if (cache) {
    cache->rows = batch.rows;
    cache->seq_len = tlen;
    cache->ids.assign(batch.ids.begin(), batch.ids.end());
    cache->lengths.assign(batch.lengths.begin(), batch.lengths.end());
    cache->emb_drop = std::move(emb_drop);
    cache->layers.assign(config.num_layers, {});
  }

  for (size_t l = 0; l < config.num_layers; ++l) {
    const auto& lp = p.layers[l];
    Matrix<T> q = linear(x, lp.wq, lp.bq);
    Matrix<T> k = linear(x, lp.wk, lp.bk);
    Matrix<T> v = linear(x, lp.wv, lp.bv);

    Matrix<T> probs(batch.rows * heads * tlen, tlen);
    Matrix<T> probs_drop =
        dropout_mask<T>(probs.rows, tlen, config.attn_dropout, mode, seed, kSiteAttnProbs, l);
    Matrix<T> ctx(rows, hid);
    for (size_t b = 0; b < batch.rows; ++b) {
      const size_t valid = batch.lengths[b];
      for (size_t h = 0; h < heads; ++h) {
        const size_t off = h * dh;
        for (size_t i = 0; i < tlen; ++i) {
          const size_t prow = (b * heads + h) * tlen + i;
          T* pr = probs.row(prow);
          const T* qi = q.row(b * tlen + i) + off;
          for (size_t j = 0; j < valid; ++j) {
            const T* kj = k.row(b * tlen + j) + off;
            T s = 0;
            for (size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
            pr[j] = s * scale;
          }
          masked_softmax_row(pr, tlen, valid);
          T* ci = ctx.row(b * tlen + i) + off;
          const T* dr = probs_drop.empty() ? nullptr : probs_drop.row(prow);
          for (size_t j = 0; j < valid; ++j) {
            const T w = dr ? pr[j] * dr[j] : pr[j];
            if (w == T(0)) continue;
            const T* vj = v.row(b * tlen + j) + off;
            for (size_t d = 0; d < dh; ++d) ci[d] += w * vj[d];
          }
        }
      }
    }

    Matrix<T> attn = linear(ctx, lp.wo, lp.bo);
    Matrix<T> attn_drop = dropout_mask<T>(rows, hid, config.dropout, mode, seed, kSiteAttnOut, l);
    apply_mask(attn, attn_drop);
    for (size_t i = 0; i < attn.size(); ++i) attn.data[i] += x.data[i];
    Matrix<T> y1;
    LayerNormCache<T> ln1;
    layer_norm_forward(attn, lp.ln1_g, lp.ln1_b, y1, ln1);

    Matrix<T> ffn_pre = linear(y1, lp.w1, lp.b1);
    Matrix<T> ffn_act = gelu_matrix(ffn_pre);
    Matrix<T> ffn = linear(ffn_act, lp.w2, lp.b2);
    Matrix<T> ffn_drop = dropout_mask<T>(rows, hid, config.dropout, mode, seed, kSiteFfnOut, l);
    apply_mask(ffn, ffn_drop);
    for (size_t i = 0; i < ffn.size(); ++i) ffn.data[i] += y1.data[i];
    Matrix<T> out;
    LayerNormCache<T> ln2;
    layer_norm_forward(ffn, lp.ln2_g, lp.ln2_b, out, ln2);
    check_finite(out, l + 1);

    if (cache) {
      auto& c = cache->layers[l];
      c.x = std::move(x);
      c.q = std::move(q);
      c.k = std::move(k);
      c.v = std::move(v);
      c.probs = std::move(probs);
      c.probs_drop = std::move(probs_drop);
      c.ctx = std::move(ctx);
      c.attn_drop = std::move(attn_drop);
      c.ln1 = std::move(ln1);
      c.y1 = std::move(y1);
      c.ffn_pre = std::move(ffn_pre);
      c.ffn_act = std::move(ffn_act);
      c.ffn_drop = std::move(ffn_drop);
      c.ln2 = std::move(ln2);
    }
    x = std::move(out);
  }
  return x;
}

}  // namespace

template <typename T>
Matrix<T> forward(const Params<T>& p, const ModelConfig& config, const BatchView& batch, Mode mode,
                  uint64_t dropout_seed, ForwardCache<T>* cache) {
  Matrix<T> z = encode(p, config, batch, mode, dropout_seed, cache);
  Matrix<T> pre = linear(z, p.head_w, p.head_b);
  Matrix<T> act = gelu_matrix(pre);
  Matrix<T> normed;
  LayerNormCache<T> ln;
  layer_norm_forward(act, p.head_ln_g, p.head_ln_b, normed, ln);
  Matrix<T> logits;
  matmul_bt(normed, p.tok_emb, logits);
  add_row_bias(logits, p.head_bias);
  check_finite(logits, config.num_layers + 1);
  if (cache) {
    cache->head = Head::kMlm;
    cache->final_hidden = std::move(z);
    cache->head_pre = std::move(pre);
    cache->head_act = std::move(act);
    cache->head_out = std::move(normed);
    cache->head_ln = std::move(ln);
  }
  return logits;
}

template <typename T>
Matrix<T> tag_forward(const Params<T>& p, const ModelConfig& config, const BatchView& batch,
                      Mode mode, uint64_t dropout_seed, ForwardCache<T>* cache) {
  if (!p.has_classifier() || config.num_labels == 0) {
    throw DataError("model not configured for tagging");
  }
  Matrix<T> z = encode(p, config, batch, mode, dropout_seed, cache);
  Matrix<T> drop =
      dropout_mask<T>(z.rows, z.cols, config.dropout, mode, dropout_seed, kSiteClassifier, 0);
  Matrix<T> in = z;
  apply_mask(in, drop);
  Matrix<T> logits = linear(in, p.cls_w, p.cls_b);
  check_finite(logits, config.num_layers + 1);
  if (cache) {
    cache->head = Head::kTagger;
    cache->final_hidden = std::move(z);
    cache->cls_drop = std::move(drop);
    cache->cls_in = std::move(in);
  }
  return logits;
}

template <typename T>
Params<T> backward(const Params<T>& p, const ModelConfig& config, const ForwardCache<T>& cache,
                   const Matrix<T>& d_logits) {
  const size_t rows = cache.rows * cache.seq_len;
  if (cache.layers.size() != config.num_layers || cache.final_hidden.rows != rows) {
    throw DataError("forward cache does not match the model");
  }
  const size_t out_cols = cache.head == Head::kMlm ? config.vocab_size : config.num_labels;
  if (d_logits.rows != rows || d_logits.cols != out_cols) {
    throw DataError("logit gradient does not match the forward batch");
  }
  Params<T> g = p.zeros_like();
  const size_t hid = config.hidden();
  const size_t heads = config.num_heads;
  const size_t dh = config.head_size;
  const size_t tlen = cache.seq_len;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Matrix<T> dz;
  if (cache.head == Head::kMlm) {
    // logits = head_out * tok_emb^T + bias
    Matrix<T> d_out;
    matmul(d_logits, p.tok_emb, d_out);
    matmul_at_acc(d_logits, cache.head_out, g.tok_emb);
    add_column_sums(d_logits, g.head_bias);
    Matrix<T> d_act;
    layer_norm_backward(d_out, p.head_ln_g, cache.head_ln, d_act, g.head_ln_g, g.head_ln_b);
    for (size_t i = 0; i < d_act.size(); ++i) {
      d_act.data[i] *= static_cast<T>(gelu_grad(cache.head_pre.data[i]));
    }
    matmul_at_acc(cache.final_hidden, d_act, g.head_w);
    add_column_sums(d_act, g.head_b);
    matmul_bt(d_act, p.head_w, dz);
  } else {
    matmul_at_acc(cache.cls_in, d_logits, g.cls_w);
    add_column_sums(d_logits, g.cls_b);
    matmul_bt(d_logits, p.cls_w, dz);
    apply_mask(dz, cache.cls_drop);
  }

  Matrix<T> dx = std::move(dz);
  for (size_t li = config.num_layers; li-- > 0;) {
    const auto& lp = p.layers[li];
    auto& lg = g.layers[li];
    const auto& c = cache.layers[li];

    Matrix<T> d_r2;
    layer_norm_backward(dx, lp.ln2_g, c.ln2, d_r2, lg.ln2_g, lg.ln2_b);
    Matrix<T> d_y1 = d_r2;
    Matrix<T> d_ffn = std::move(d_r2);
    apply_mask(d_ffn, c.ffn_drop);
    matmul_at_acc(c.ffn_act, d_ffn, lg.w2);
    add_column_sums(d_ffn, lg.b2);
    Matrix<T> d_act;
    matmul_bt(d_ffn, lp.w2, d_act);
    for (size_t i = 0; i < d_act.size(); ++i) {
      d_act.data[i] *= static_cast<T>(gelu_grad(c.ffn_pre.data[i]));
    }
    matmul_at_acc(c.y1, d_act, lg.w1);
    add_column_sums(d_act, lg.b1);
    Matrix<T> tmp;
    matmul_bt(d_act, lp.w1, tmp);
    for (size_t i = 0; i < tmp.size(); ++i) d_y1.data[i] += tmp.data[i];

    Matrix<T> d_r1;
    layer_norm_backward(d_y1, lp.ln1_g, c.ln1, d_r1, lg.ln1_g, lg.ln1_b);
    Matrix<T> d_x = d_r1;
    Matrix<T> d_attn = std::move(d_r1);
    apply_mask(d_attn, c.attn_drop);
    matmul_at_acc(c.ctx, d_attn, lg.wo);
    add_column_sums(d_attn, lg.bo);
    Matrix<T> d_ctx;
    matmul_bt(d_attn, lp.wo, d_ctx);

    Matrix<T> dq(rows, hid), dk(rows, hid), dv(rows, hid);
    std::vector<T> dp(tlen);
    for (size_t b = 0; b < cache.rows; ++b) {
      const size_t valid = cache.lengths[b];
      for (size_t h = 0; h < heads; ++h) {
        const size_t off = h * dh;
        for (size_t i = 0; i < tlen; ++i) {
          const size_t prow = (b * heads + h) * tlen + i;
          const T* pr = c.probs.row(prow);
          const T* dr = c.probs_drop.empty() ? nullptr : c.probs_drop.row(prow);
          const T* dci = d_ctx.row(b * tlen + i) + off;
          // d(weights) and dV
          for (size_t j = 0; j < valid; ++j) {
            const T* vj = c.v.row(b * tlen + j) + off;
            T s = 0;
            for (size_t d = 0; d < dh; ++d) s += dci[d] * vj[d];
            const T m = dr ? dr[j] : T(1);
            dp[j] = s * m;
            const T w = pr[j] * m;
            if (w != T(0)) {
              T* dvj = dv.row(b * tlen + j) + off;
              for (size_t d = 0; d < dh; ++d) dvj[d] += w * dci[d];
            }
          }
          // softmax backward
          T dot = 0;
          for (size_t j = 0; j < valid; ++j) dot += dp[j] * pr[j];
          const T* qi = c.q.row(b * tlen + i) + off;
          T* dqi = dq.row(b * tlen + i) + off;
          for (size_t j = 0; j < valid; ++j) {
            const T ds = pr[j] * (dp[j] - dot) * scale;
            if (ds == T(0)) continue;
            const T* kj = c.k.row(b * tlen + j) + off;
            T* dkj = dk.row(b * tlen + j) + off;
            for (size_t d = 0; d < dh; ++d) {
              dqi[d] += ds * kj[d];
              dkj[d] += ds * qi[d];
            }
          }
        }
      }
    }

    const std::pair<const Matrix<T>*, std::pair<Matrix<T>*, Matrix<T>*>> projections[] = {
        {&dq, {&lg.wq, &lg.bq}}, {&dk, {&lg.wk, &lg.bk}}, {&dv, {&lg.wv, &lg.bv}}};
    const Matrix<T>* weights[] = {&lp.wq, &lp.wk, &lp.wv};
    for (size_t s = 0; s < 3; ++s) {
      const Matrix<T>& d = *projections[s].first;
      matmul_at_acc(c.x, d, *projections[s].second.first);
      add_column_sums(d, *projections[s].second.second);
      matmul_bt(d, *weights[s], tmp);
      for (size_t i = 0; i < tmp.size(); ++i) d_x.data[i] += tmp.data[i];
    }
    dx = std::move(d_x);
  }

  apply_mask(dx, cache.emb_drop);
  for (size_t n = 0; n < rows; ++n) {
    const T* dn = dx.row(n);
    T* ge = g.tok_emb.row(cache.ids[n]);
    T* gp = g.pos_emb.row(n % tlen);
    for (size_t j = 0; j < hid; ++j) {
      ge[j] += dn[j];
      gp[j] += dn[j];
    }
  }
  return g;
}

template <typename T>
LossResult<T> masked_cross_entropy(const Matrix<T>& logits, std::span<const int32_t> labels) {
  if (labels.size() != logits.rows) throw DataError("labels do not match logits");
  LossResult<T> r;
  r.d_logits = Matrix<T>(logits.rows, logits.cols);
  for (int32_t y : labels) {
    if (y == kIgnoreLabel) continue;
    if (y < 0 || static_cast<size_t>(y) >= logits.cols) throw DataError("label out of range");
    ++r.count;
  }
  if (r.count == 0) throw DataError("no masked tokens in batch");
  const double inv = 1.0 / static_cast<double>(r.count);
  double total = 0;
  for (size_t i = 0; i < logits.rows; ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    const T* li = logits.row(i);
    double max = li[0];
    for (size_t j = 1; j < logits.cols; ++j) max = std::max<double>(max, li[j]);
    double sum = 0;
    for (size_t j = 0; j < logits.cols; ++j) sum += std::exp(static_cast<double>(li[j]) - max);
    const double log_z = max + std::log(sum);
    total += log_z - static_cast<double>(li[labels[i]]);
    T* gi = r.d_logits.row(i);
    for (size_t j = 0; j < logits.cols; ++j) {
      gi[j] = static_cast<T>(std::exp(static_cast<double>(li[j]) - log_z) * inv);
    }
    gi[labels[i]] -= static_cast<T>(inv);
  }
  r.loss = total * inv;
  if (!std::isfinite(r.loss)) throw NumericError("non-finite loss");
  return r;
}

#define MLM_INSTANTIATE(T)                                                                      \
  template struct Params<T>;                                                                    \
  template Params<T> init_params<T>(const ModelConfig&, uint64_t);                              \
  template Params<T> zero_params<T>(const ModelConfig&);                                        \
  template void attach_classifier<T>(Params<T>&, ModelConfig&, size_t, uint64_t);               \
  template Matrix<T> forward<T>(const Params<T>&, const ModelConfig&, const BatchView&, Mode,   \
                                uint64_t, ForwardCache<T>*);                                    \
  template Matrix<T> tag_forward<T>(const Params<T>&, const ModelConfig&, const BatchView&,     \
                                    Mode, uint64_t, ForwardCache<T>*);                          \
  template Params<T> backward<T>(const Params<T>&, const ModelConfig&, const ForwardCache<T>&,  \
                                 const Matrix<T>&);                                             \
  template LossResult<T> masked_cross_entropy<T>(const Matrix<T>&, std::span<const int32_t>);   \
  template void layer_norm_forward<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,     \
                                      Matrix<T>&, LayerNormCache<T>&);                          \
  template void masked_softmax_row<T>(T*, size_t, size_t);

MLM_INSTANTIATE(float)
MLM_INSTANTIATE(double)
#undef MLM_INSTANTIATE

template Params<float> cast_params<float, double>(const Params<double>&);
template Params<double> cast_params<double, float>(const Params<float>&);
template Params<float> cast_params<float, float>(const Params<float>&);
template Params<double> cast_params<double, double>(const Params<double>&);

}  // namespace mlm
