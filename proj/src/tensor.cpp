// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "tensor.hpp"

#include <cmath>

namespace s2s {

bool Tensor::finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n,
                bool trans_a, bool trans_b, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
  if (!trans_a && !trans_b) {
    // C[i,j] += A[i,p] B[p,j]; i-p-j order keeps B and C accesses contiguous.
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<size_t>(i) * k;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + static_cast<size_t>(p) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    // C[i,j] += A[i,p] B[j,p]; rows of both operands are contiguous.
    for (int i = 0; i < m; ++i) {
      const double* arow = a + static_cast<size_t>(i) * k;
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    // C[i,j] += A[p,i] B[p,j]
    for (int p = 0; p < k; ++p) {
      const double* arow = a + static_cast<size_t>(p) * m;
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int i = 0; i < m; ++i) {
        double av = arow[i];
        if (av == 0.0) continue;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // C[i,j] += A[p,i] B[j,p]
    for (int i = 0; i < m; ++i) {
      double* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* brow = b + static_cast<size_t>(j) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += a[static_cast<size_t>(p) * m + i] * brow[p];
        crow[j] += acc;
      }
    }
  }
}

}  // namespace s2s
