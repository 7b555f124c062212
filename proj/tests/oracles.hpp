// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. These are
// deliberately written with plain loops and long doubles, not by calling
// into the library under test.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

// Scalar softmax reference at extended precision.
inline std::vector<double> softmax_reference(const std::vector<double>& x) {
  long double mx = x[0];
  for (double v : x) mx = std::max<long double>(mx, v);
  long double sum = 0.0L;
  std::vector<long double> e(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    e[i] = expl(static_cast<long double>(x[i]) - mx);
    sum += e[i];
  }
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(e[i] / sum);
  return out;
}

// Textbook Levenshtein distance over int sequences.
inline int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

// Brute-force candidate set: every (entity, contiguous window) pair whose
// edit distance is within budget, with the minimal distance as cost.
struct WindowHit {
  std::string entity_id;
  int start_segment;
  int end_segment;  // inclusive
  int cost;
  bool operator<(const WindowHit& o) const {
    return std::tie(entity_id, start_segment, end_segment, cost) <
           std::tie(o.entity_id, o.start_segment, o.end_segment, o.cost);
  }
  bool operator==(const WindowHit& o) const {
    return entity_id == o.entity_id && start_segment == o.start_segment &&
           end_segment == o.end_segment && cost == o.cost;
  }
};

inline std::vector<WindowHit> brute_force_spans(
    const std::vector<int>& path_symbols,
    const std::vector<std::pair<std::string, std::vector<int>>>& entities, int budget) {
  std::vector<WindowHit> hits;
  const int n = static_cast<int>(path_symbols.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::vector<int> window(path_symbols.begin() + i, path_symbols.begin() + j + 1);
      for (const auto& [id, seq] : entities) {
        int d = levenshtein(window, seq);
        if (d <= budget) hits.push_back({id, i, j, d});
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

// Scalar Adam reference for a single parameter.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  double lr, beta1, beta2, eps;
  ScalarAdam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr(lr), beta1(beta1), beta2(beta2), eps(eps) {}
  double step(double param, double grad, int t) {
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad * grad;
    double mh = m / (1 - std::pow(beta1, t));
    double vh = v / (1 - std::pow(beta2, t));
    return param - lr * mh / (std::sqrt(vh) + eps);
  }
};

// Mean entropy of probability rows (natural log).
inline double mean_row_entropy(const std::vector<double>& rows, int cols) {
  int n = static_cast<int>(rows.size()) / cols;
  long double total = 0.0L;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < cols; ++c) {
      double p = rows[static_cast<size_t>(r) * cols + c];
      if (p > 0.0) total -= static_cast<long double>(p) * logl(p);
    }
  }
  return static_cast<double>(total / n);
}

inline std::vector<double> random_vector(std::mt19937_64& rng, size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

}  // namespace oracle
