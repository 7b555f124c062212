// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "common.hpp"

namespace s2s {

// Dense row-major tensor of doubles with an optional gradient buffer.
// Rank is 1 or 2; rank-1 tensors behave like a single row.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty or same length as data

  Tensor() = default;
  Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
    data.assign(element_count(), fill);
  }

  size_t element_count() const {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return shape.empty() ? 0 : n;
  }
  int rows() const { return shape.size() == 2 ? shape[0] : 1; }
  int cols() const { return shape.empty() ? 0 : shape.back(); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool finite() const;
};

// C[MxN] += / = op(A) * op(B) for row-major buffers.
void matmul_acc(const double* a, const double* b, double* c, int m, int k, int n,
                bool trans_a, bool trans_b, bool accumulate);

}  // namespace s2s
