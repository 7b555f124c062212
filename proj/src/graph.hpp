// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over 2-D tensors, sized for a small transformer
// stack. Graphs are built per forward pass; backward() runs the tape in
// reverse topological order and flushes parameter gradients into the
// owning ParamStore.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "params.hpp"
#include "tensor.hpp"

namespace s2s {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<double> val;
  std::vector<double> grad;
  bool needs_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_fn;
  ParamEntry* param = nullptr;  // set on parameter leaves

  size_t size() const { return val.size(); }
  double scalar() const { return val[0]; }
  double& at(int r, int c) { return val[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return val[static_cast<size_t>(r) * cols + c]; }
};

enum class Activation { Gelu, Relu, Identity };

Activation activation_from_string(const std::string& name);
const char* activation_name(Activation a);

// Build context: caches one leaf per parameter so gradient fan-in
// accumulates naturally, and hosts the dropout RNG for training graphs.
class Graph {
 public:
  explicit Graph(ParamStore* params = nullptr, bool training = false,
                 uint64_t dropout_seed = 0)
      : params_(params), training_(training), dropout_rng_(dropout_seed) {}

  Var param(const std::string& name);
  bool training() const { return training_; }
  std::mt19937_64& dropout_rng() { return dropout_rng_; }

  // Dropout on the residual branch; identity when not training or p == 0.
  Var dropout(const Var& x, double p);

 private:
  ParamStore* params_;
  bool training_;
  std::mt19937_64 dropout_rng_;
  std::map<std::string, Var> param_leaves_;
};

Var constant(int rows, int cols, std::vector<double> values);
Var constant_scalar(double v);

Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);
Var add(const Var& a, const Var& b);
Var add_rowvec(const Var& x, const Var& bias);
Var scale(const Var& a, double s);
Var activate(const Var& x, Activation act);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Masked softmax over rows; masked columns get exactly zero weight.
Var softmax_rows(const Var& x, const std::vector<bool>* col_mask = nullptr);
// Expands a learned per-head table of clipped relative offsets into an
// L x L additive attention bias for one head.
Var relative_bias(const Var& table, int head, int length, int clip);
Var slice_cols(const Var& a, int first, int count);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(const Var& a, std::vector<int> indices);

// Mean negative log-likelihood of integer targets under row softmax.
// mask, when given, selects the supervised rows.
Var cross_entropy(const Var& logits, const std::vector<int>& targets,
                  const std::vector<bool>* mask = nullptr);
// Soft-target variant: targets are probability rows of the same shape.
Var cross_entropy_soft(const Var& logits, const std::vector<double>& target_rows);

// Composite transformer pieces. Parameters are resolved through `g` by
// name: <prefix>.wq/.bq/.wk/.bk/.wv/.bv/.wo/.bo for attention,
// <prefix>.w1/.b1/.w2/.b2 for the feed-forward, <prefix>.gamma/.beta for
// layer norms.
Var multi_head_attention(Graph& g, const Var& q_in, const Var& kv_in,
                         const std::string& prefix, int heads,
                         const Var& rel_table, int rel_clip,
                         const std::vector<bool>* key_mask);
Var feed_forward(Graph& g, const Var& x, const std::string& prefix, Activation act);
// Post-norm encoder block: LayerNorm(x + SelfAttn(x)) then
// LayerNorm(x' + FFN(x')).
Var encoder_block(Graph& g, const Var& x, const std::string& prefix, int heads,
                  Activation act, const Var& rel_table, int rel_clip,
                  const std::vector<bool>* key_mask, double dropout_p);

// Runs reverse accumulation from a scalar root and adds parameter-leaf
// gradients into their ParamStore entries.
void backward(const Var& root);

}  // namespace s2s
