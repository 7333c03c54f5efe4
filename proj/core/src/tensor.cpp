// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "mlm/tensor.hpp"

#include <cassert>
#include <cmath>

namespace mlm {

template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.cols == b.rows);
  c = Matrix<T>(a.rows, b.cols);
  const size_t n = b.cols;
  for (size_t i = 0; i < a.rows; ++i) {
    T* ci = c.row(i);
    const T* ai = a.row(i);
    for (size_t k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      const T* bk = b.row(k);
      for (size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
}

template <typename T>
void matmul_bt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.cols == b.cols);
  c = Matrix<T>(a.rows, b.rows);
  const size_t k = a.cols;
  for (size_t i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    T* ci = c.row(i);
    for (size_t j = 0; j < b.rows; ++j) {
      const T* bj = b.row(j);
      T sum = 0;
      for (size_t p = 0; p < k; ++p) sum += ai[p] * bj[p];
      ci[j] = sum;
    }
  }
}

template <typename T>
void matmul_at_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  const size_t n = b.cols;
  for (size_t i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    const T* bi = b.row(i);
    for (size_t k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      if (aik == T(0)) continue;
      T* ck = c.row(k);
      for (size_t j = 0; j < n; ++j) ck[j] += aik * bi[j];
    }
  }
}

template <typename T>
void add_row_bias(Matrix<T>& x, const Matrix<T>& bias) {
  assert(bias.size() == x.cols);
  for (size_t i = 0; i < x.rows; ++i) {
    T* xi = x.row(i);
    for (size_t j = 0; j < x.cols; ++j) xi[j] += bias.data[j];
  }
}

template <typename T>
void add_column_sums(const Matrix<T>& x, Matrix<T>& acc) {
  assert(acc.size() == x.cols);
  for (size_t i = 0; i < x.rows; ++i) {
    const T* xi = x.row(i);
    for (size_t j = 0; j < x.cols; ++j) acc.data[j] += xi[j];
  }
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

#define MLM_INSTANTIATE(T)                                                   \
  template void matmul<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&);   \
  template void matmul_bt<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&); \
  template void matmul_at_acc<T>(const Matrix<T>&, const Matrix<T>&, Matrix<T>&); \
  template void add_row_bias<T>(Matrix<T>&, const Matrix<T>&);               \
  template void add_column_sums<T>(const Matrix<T>&, Matrix<T>&);            \
  template bool all_finite<T>(std::span<const T>);

MLM_INSTANTIATE(float)
MLM_INSTANTIATE(double)
#undef MLM_INSTANTIATE

}  // namespace mlm
