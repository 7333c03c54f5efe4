// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/optim.hpp"

#include <algorithm>
#include <cmath>

#include "mlm/error.hpp"

namespace mlm {

void AdamHyper::validate() const {
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw DataError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0)) throw DataError("adam eps must be positive");
  if (!(weight_decay >= 0)) throw DataError("weight decay must be non-negative");
}

template <typename T>
AdamState<T> AdamState<T>::zeros_for(const Params<T>& params) {
  AdamState<T> s;
  for (const auto& r : params.refs()) {
    s.m.emplace_back(r.tensor->rows, r.tensor->cols);
    s.v.emplace_back(r.tensor->rows, r.tensor->cols);
  }
  return s;
}

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 uint64_t step, const AdamHyper& hyper, double lr, bool decay) {
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(hyper.beta1);
  const T b2 = static_cast<T>(hyper.beta2);
  const T one = T(1);
  for (size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    if (!std::isfinite(g)) throw NumericError("gradient overflow");
    m[i] = b1 * m[i] + (one - b1) * g;
    v[i] = b2 * v[i] + (one - b2) * g * g;
    const double m_hat = static_cast<double>(m[i]) / bc1;
    const double v_hat = static_cast<double>(v[i]) / bc2;
    const double p = param[i];
    double updated = p - lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    if (decay) updated -= lr * hyper.weight_decay * p;
    param[i] = static_cast<T>(updated);
  }
}

template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state,
               const AdamHyper& hyper, double lr) {
  auto p = params.refs();
  auto g = grads.refs();
  if (p.size() != g.size() || state.m.size() != p.size() || state.v.size() != p.size()) {
    throw DataError("optimizer state does not match parameters");
  }
  const uint64_t t = state.step + 1;
  for (size_t i = 0; i < p.size(); ++i) {
    if (!p[i].tensor->same_shape(*g[i].tensor) || !p[i].tensor->same_shape(state.m[i])) {
      throw DataError("shape mismatch for " + p[i].name);
    }
    adam_update<T>(p[i].tensor->span(), g[i].tensor->span(), state.m[i].span(),
                   state.v[i].span(), t, hyper, lr, p[i].decay);
  }
  state.step = t;
}

template <typename T>
double clip_grad_norm(Params<T>& grads, double threshold) {
  double sq = 0;
  for (const auto& r : std::as_const(grads).refs()) {
    for (T v : r.tensor->data) sq += static_cast<double>(v) * static_cast<double>(v);
  }
  const double norm = std::sqrt(sq);
  if (threshold > 0 && norm > threshold) {
    const T factor = static_cast<T>(threshold / norm);
    for (auto& r : grads.refs()) {
      for (T& v : r.tensor->data) v *= factor;
    }
  }
  return norm;
}

void Schedule::validate() const {
  if (warmup_steps == 0 || warmup_steps > max_steps) {
    throw DataError("schedule needs 0 < warmup_steps <= max_steps");
  }
  if (!(peak_lr > 0)) throw DataError("peak learning rate must be positive");
}

double Schedule::lr_at(uint64_t step) const {
  if (step > max_steps) {
    throw DataError("step " + std::to_string(step) + " beyond schedule end " +
                    std::to_string(max_steps));
  }
  if (step < warmup_steps) {
    return peak_lr * (static_cast<double>(step) / static_cast<double>(warmup_steps));
  }
  if (kind == ScheduleKind::kConstantAfterWarmup || max_steps == warmup_steps) return peak_lr;
  const double remaining = static_cast<double>(max_steps - step);
  const double span = static_cast<double>(max_steps - warmup_steps);
  return peak_lr * (remaining / span);
}

uint64_t warmup_from_ratio(double warmup_ratio, uint64_t total_steps) {
  if (total_steps == 0) return 0;
  const auto w = static_cast<uint64_t>(std::llround(warmup_ratio * static_cast<double>(total_steps)));
  return std::clamp<uint64_t>(w, 1, total_steps);
}

#define MLM_INSTANTIATE(T)                                                                   \
  template struct AdamState<T>;                                                              \
  template void adam_update<T>(std::span<T>, std::span<const T>, std::span<T>, std::span<T>, \
                               uint64_t, const AdamHyper&, double, bool);                    \
  template void adam_step<T>(Params<T>&, const Params<T>&, AdamState<T>&, const AdamHyper&,  \
                             double);                                                        \
  template double clip_grad_norm<T>(Params<T>&, double);

MLM_INSTANTIATE(float)
MLM_INSTANTIATE(double)
#undef MLM_INSTANTIATE

}  // namespace mlm
