// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace mlm {

// Dense row-major matrix. Vectors are stored as 1 x n.
template <typename T>
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  const T& operator()(size_t r, size_t c) const { return data[r * cols + c]; }
  T* row(size_t r) { return data.data() + r * cols; }
  const T* row(size_t r) const { return data.data() + r * cols; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// C = A * B
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

// C = A * B^T
template <typename T>
void matmul_bt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

// C += A^T * B
template <typename T>
void matmul_at_acc(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c);

// Adds the 1 x cols bias to every row.
template <typename T>
void add_row_bias(Matrix<T>& x, const Matrix<T>& bias);

// acc (1 x cols) += column sums of x.
template <typename T>
void add_column_sums(const Matrix<T>& x, Matrix<T>& acc);

template <typename T>
bool all_finite(std::span<const T> values);

}  // namespace mlm
