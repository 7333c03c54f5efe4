// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlm/model.hpp"
#include "mlm/tensor.hpp"

namespace mlm {

struct AdamHyper {
  double eps = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.01;

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<Matrix<T>> m;  // first moments, parallel to Params::refs()
  std::vector<Matrix<T>> v;  // second moments
  uint64_t step = 0;

  static AdamState zeros_for(const Params<T>& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One AdamW update of a flat parameter block, with step = t (>= 1):
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p     (wd only when decay)
// with m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t). Throws
// NumericError("gradient overflow") on a non-finite gradient.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 uint64_t step, const AdamHyper& hyper, double lr, bool decay);

// Advances state.step and updates every tensor. Biases and layer-norm
// parameters are exempt from weight decay.
template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state,
               const AdamHyper& hyper, double lr);

// Rescales grads so their global L2 norm is at most threshold. A threshold
// <= 0 disables clipping. Returns the norm before clipping.
template <typename T>
double clip_grad_norm(Params<T>& grads, double threshold);

enum class ScheduleKind { kLinearDecay, kConstantAfterWarmup };

struct Schedule {
  ScheduleKind kind = ScheduleKind::kLinearDecay;
  uint64_t warmup_steps = 10000;
  double peak_lr = 1e-5;
  uint64_t max_steps = 600000;

  void validate() const;
  // Linear warmup from 0 to peak over warmup_steps, then either linear decay
  // to 0 at max_steps or a constant peak. Throws for step > max_steps.
  double lr_at(uint64_t step) const;
};

// warmup_ratio * total_steps rounded to nearest, clamped to [1, total_steps].
uint64_t warmup_from_ratio(double warmup_ratio, uint64_t total_steps);

}  // namespace mlm
