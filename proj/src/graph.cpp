// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace s2s {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Var make_node(int rows, int cols, std::vector<Var> parents) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->val.assign(static_cast<size_t>(rows) * cols, 0.0);
  for (const auto& p : parents) {
    if (p->needs_grad) n->needs_grad = true;
  }
  n->parents = std::move(parents);
  return n;
}

void check_finite(const Var& v, const char* what) {
  for (double x : v->val) {
    if (!std::isfinite(x)) throw RuntimeError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "gelu") return Activation::Gelu;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + name);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "gelu";
}

Var Graph::param(const std::string& name) {
  auto it = param_leaves_.find(name);
  if (it != param_leaves_.end()) return it->second;
  if (params_ == nullptr) throw RuntimeError("graph has no parameter store");
  ParamEntry& e = params_->entry(name);
  auto n = std::make_shared<Node>();
  n->rows = e.tensor.rows();
  n->cols = e.tensor.cols();
  n->val = e.tensor.data;
  n->needs_grad = true;
  n->param = &e;
  param_leaves_[name] = n;
  return n;
}

Var Graph::dropout(const Var& x, double p) {
  if (!training_ || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  auto out = make_node(x->rows, x->cols, {x});
  auto mask = std::make_shared<std::vector<double>>(x->size());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < x->size(); ++i) {
    double m = unit(dropout_rng_) < p ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out->val[i] = x->val[i] * m;
  }
  out->backward_fn = [mask](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    for (size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i] * (*mask)[i];
  };
  return out;
}

Var constant(int rows, int cols, std::vector<double> values) {
  if (values.size() != static_cast<size_t>(rows) * cols) {
    throw RuntimeError("constant: size mismatch");
  }
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->val = std::move(values);
  return n;
}

Var constant_scalar(double v) { return constant(1, 1, {v}); }

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  int am = trans_a ? a->cols : a->rows;
  int ak = trans_a ? a->rows : a->cols;
  int bk = trans_b ? b->cols : b->rows;
  int bn = trans_b ? b->rows : b->cols;
  if (ak != bk) throw RuntimeError("matmul: inner dimension mismatch");
  auto out = make_node(am, bn, {a, b});
  matmul_acc(a->val.data(), b->val.data(), out->val.data(), am, ak, bn, trans_a, trans_b,
             false);
  out->backward_fn = [am, ak, bn, trans_a, trans_b](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const double* d = n.grad.data();
    if (a.needs_grad) {
      if (!trans_a) {
        // dA += trans_b ? dC*B : dC*B^T
        matmul_acc(d, b.val.data(), a.grad.data(), am, bn, ak, false, !trans_b, true);
      } else {
        // A used transposed: dA^T has shape am x ak, so dA = (above)^T.
        matmul_acc(b.val.data(), d, a.grad.data(), ak, bn, am, trans_b, true, true);
      }
    }
    if (b.needs_grad) {
      if (!trans_b) {
        matmul_acc(a.val.data(), d, b.grad.data(), ak, am, bn, !trans_a, false, true);
      } else {
        matmul_acc(d, a.val.data(), b.grad.data(), bn, am, ak, true, trans_a, true);
      }
    }
  };
  return out;
}

Var add(const Var& a, const Var& b) {
  if (a->rows != b->rows || a->cols != b->cols) throw RuntimeError("add: shape mismatch");
  auto out = make_node(a->rows, a->cols, {a, b});
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] + b->val[i];
  out->backward_fn = [](Node& n) {
    for (int p = 0; p < 2; ++p) {
      Node& a = *n.parents[p];
      if (!a.needs_grad) continue;
      for (size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i];
    }
  };
  return out;
}

Var add_rowvec(const Var& x, const Var& bias) {
  if (bias->rows != 1 || bias->cols != x->cols) {
    throw RuntimeError("add_rowvec: bias shape mismatch");
  }
  auto out = make_node(x->rows, x->cols, {x, bias});
  for (int r = 0; r < x->rows; ++r) {
    for (int c = 0; c < x->cols; ++c) out->at(r, c) = x->at(r, c) + bias->val[c];
  }
  out->backward_fn = [](Node& n) {
    Node& x = *n.parents[0];
    Node& b = *n.parents[1];
    if (x.needs_grad) {
      for (size_t i = 0; i < n.size(); ++i) x.grad[i] += n.grad[i];
    }
    if (b.needs_grad) {
      for (int r = 0; r < n.rows; ++r) {
        for (int c = 0; c < n.cols; ++c) b.grad[c] += n.grad[static_cast<size_t>(r) * n.cols + c];
      }
    }
  };
  return out;
}

Var scale(const Var& a, double s) {
  auto out = make_node(a->rows, a->cols, {a});
  for (size_t i = 0; i < out->size(); ++i) out->val[i] = a->val[i] * s;
  out->backward_fn = [s](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    for (size_t i = 0; i < n.size(); ++i) a.grad[i] += n.grad[i] * s;
  };
  return out;
}

Var activate(const Var& x, Activation act) {
  if (act == Activation::Identity) return x;
  auto out = make_node(x->rows, x->cols, {x});
  if (act == Activation::Gelu) {
    for (size_t i = 0; i < x->size(); ++i) {
      double v = x->val[i];
      out->val[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    out->backward_fn = [](Node& n) {
      Node& x = *n.parents[0];
      if (!x.needs_grad) return;
      for (size_t i = 0; i < n.size(); ++i) {
        double v = x.val[i];
        double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        x.grad[i] += n.grad[i] * (cdf + v * pdf);
      }
    };
  } else {
    for (size_t i = 0; i < x->size(); ++i) out->val[i] = x->val[i] > 0.0 ? x->val[i] : 0.0;
    out->backward_fn = [](Node& n) {
      Node& x = *n.parents[0];
      if (!x.needs_grad) return;
      for (size_t i = 0; i < n.size(); ++i) {
        if (x.val[i] > 0.0) x.grad[i] += n.grad[i];
      }
    };
  }
  return out;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (eps <= 0.0) throw RuntimeError("layer_norm: eps must be positive");
  if (gamma->cols != x->cols || beta->cols != x->cols || gamma->rows != 1 || beta->rows != 1) {
    throw RuntimeError("layer_norm: affine shape mismatch");
  }
  int H = x->cols;
  auto out = make_node(x->rows, x->cols, {x, gamma, beta});
  auto xhat = std::make_shared<std::vector<double>>(x->size());
  auto inv_std = std::make_shared<std::vector<double>>(x->rows);
  for (int r = 0; r < x->rows; ++r) {
    const double* row = x->val.data() + static_cast<size_t>(r) * H;
    double mean = 0.0;
    for (int c = 0; c < H; ++c) mean += row[c];
    mean /= H;
    double var = 0.0;
    for (int c = 0; c < H; ++c) {
      double d = row[c] - mean;
      var += d * d;
    }
    var /= H;
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = inv;
    for (int c = 0; c < H; ++c) {
      double h = (row[c] - mean) * inv;
      (*xhat)[static_cast<size_t>(r) * H + c] = h;
      out->at(r, c) = h * gamma->val[c] + beta->val[c];
    }
  }
  out->backward_fn = [xhat, inv_std, H](Node& n) {
    Node& x = *n.parents[0];
    Node& gamma = *n.parents[1];
    Node& beta = *n.parents[2];
    for (int r = 0; r < n.rows; ++r) {
      const double* dy = n.grad.data() + static_cast<size_t>(r) * H;
      const double* xh = xhat->data() + static_cast<size_t>(r) * H;
      if (gamma.needs_grad) {
        for (int c = 0; c < H; ++c) gamma.grad[c] += dy[c] * xh[c];
      }
      if (beta.needs_grad) {
        for (int c = 0; c < H; ++c) beta.grad[c] += dy[c];
      }
      if (x.needs_grad) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < H; ++c) {
          double dxh = dy[c] * gamma.val[c];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xh[c];
        }
        double inv = (*inv_std)[r];
        double* dx = x.grad.data() + static_cast<size_t>(r) * H;
        for (int c = 0; c < H; ++c) {
          double dxh = dy[c] * gamma.val[c];
          dx[c] += inv * (dxh - (sum_dxhat + xh[c] * sum_dxhat_xhat) / H);
        }
      }
    }
  };
  return out;
}

Var softmax_rows(const Var& x, const std::vector<bool>* col_mask) {
  check_finite(x, "softmax_rows");
  if (col_mask && static_cast<int>(col_mask->size()) != x->cols) {
    throw RuntimeError("softmax_rows: mask length mismatch");
  }
  int C = x->cols;
  auto out = make_node(x->rows, x->cols, {x});
  std::shared_ptr<std::vector<bool>> mask;
  if (col_mask) mask = std::make_shared<std::vector<bool>>(*col_mask);
  for (int r = 0; r < x->rows; ++r) {
    const double* row = x->val.data() + static_cast<size_t>(r) * C;
    double* orow = out->val.data() + static_cast<size_t>(r) * C;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c) {
      if (mask && !(*mask)[c]) continue;
      mx = std::max(mx, row[c]);
    }
    if (!std::isfinite(mx)) throw RuntimeError("softmax_rows: all columns masked");
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      if (mask && !(*mask)[c]) {
        orow[c] = 0.0;
        continue;
      }
      orow[c] = std::exp(row[c] - mx);
      sum += orow[c];
    }
    for (int c = 0; c < C; ++c) {
      if (mask && !(*mask)[c]) continue;
      orow[c] /= sum;
    }
  }
  out->backward_fn = [mask, C](Node& n) {
    Node& x = *n.parents[0];
    if (!x.needs_grad) return;
    for (int r = 0; r < n.rows; ++r) {
      const double* y = n.val.data() + static_cast<size_t>(r) * C;
      const double* dy = n.grad.data() + static_cast<size_t>(r) * C;
      double* dx = x.grad.data() + static_cast<size_t>(r) * C;
      double dot = 0.0;
      for (int c = 0; c < C; ++c) {
        if (mask && !(*mask)[c]) continue;
        dot += dy[c] * y[c];
      }
      for (int c = 0; c < C; ++c) {
        if (mask && !(*mask)[c]) continue;
        dx[c] += y[c] * (dy[c] - dot);
      }
    }
  };
  return out;
}

Var relative_bias(const Var& table, int head, int length, int clip) {
  int span = 2 * clip + 1;
  if (table->cols != span) throw RuntimeError("relative_bias: table width != 2*clip+1");
  if (head < 0 || head >= table->rows) throw RuntimeError("relative_bias: head out of range");
  auto out = make_node(length, length, {table});
  for (int i = 0; i < length; ++i) {
    for (int j = 0; j < length; ++j) {
      int off = std::clamp(j - i, -clip, clip) + clip;
      out->at(i, j) = table->at(head, off);
    }
  }
  out->backward_fn = [head, clip, length](Node& n) {
    Node& t = *n.parents[0];
    if (!t.needs_grad) return;
    int span = 2 * clip + 1;
    for (int i = 0; i < length; ++i) {
      for (int j = 0; j < length; ++j) {
        int off = std::clamp(j - i, -clip, clip) + clip;
        t.grad[static_cast<size_t>(head) * span + off] += n.grad[static_cast<size_t>(i) * length + j];
      }
    }
  };
  return out;
}

Var slice_cols(const Var& a, int first, int count) {
  if (first < 0 || count <= 0 || first + count > a->cols) {
    throw RuntimeError("slice_cols: range out of bounds");
  }
  auto out = make_node(a->rows, count, {a});
  for (int r = 0; r < a->rows; ++r) {
    for (int c = 0; c < count; ++c) out->at(r, c) = a->at(r, first + c);
  }
  out->backward_fn = [first, count](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    for (int r = 0; r < n.rows; ++r) {
      for (int c = 0; c < count; ++c) {
        a.grad[static_cast<size_t>(r) * a.cols + first + c] += n.grad[static_cast<size_t>(r) * count + c];
      }
    }
  };
  return out;
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw RuntimeError("concat_cols: no inputs");
  int rows = parts[0]->rows;
  int cols = 0;
  for (const auto& p : parts) {
    if (p->rows != rows) throw RuntimeError("concat_cols: row mismatch");
    cols += p->cols;
  }
  auto out = make_node(rows, cols, parts);
  int offset = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < p->cols; ++c) out->at(r, offset + c) = p->at(r, c);
    }
    offset += p->cols;
  }
  out->backward_fn = [](Node& n) {
    int offset = 0;
    for (auto& pv : n.parents) {
      Node& p = *pv;
      if (p.needs_grad) {
        for (int r = 0; r < n.rows; ++r) {
          for (int c = 0; c < p.cols; ++c) {
            p.grad[static_cast<size_t>(r) * p.cols + c] +=
                n.grad[static_cast<size_t>(r) * n.cols + offset + c];
          }
        }
      }
      offset += p.cols;
    }
  };
  return out;
}

Var gather_rows(const Var& a, std::vector<int> indices) {
  for (int i : indices) {
    if (i < 0 || i >= a->rows) throw RuntimeError("gather_rows: index out of range");
  }
  auto out = make_node(static_cast<int>(indices.size()), a->cols, {a});
  auto idx = std::make_shared<std::vector<int>>(std::move(indices));
  for (size_t r = 0; r < idx->size(); ++r) {
    for (int c = 0; c < a->cols; ++c) out->at(static_cast<int>(r), c) = a->at((*idx)[r], c);
  }
  out->backward_fn = [idx](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    for (size_t r = 0; r < idx->size(); ++r) {
      for (int c = 0; c < n.cols; ++c) {
        a.grad[static_cast<size_t>((*idx)[r]) * a.cols + c] += n.grad[r * n.cols + c];
      }
    }
  };
  return out;
}

namespace {

// Shared softmax for the cross-entropy losses; returns row probabilities.
std::vector<double> row_softmax(const Var& logits) {
  int R = logits->rows, C = logits->cols;
  std::vector<double> probs(logits->size());
  for (int r = 0; r < R; ++r) {
    const double* row = logits->val.data() + static_cast<size_t>(r) * C;
    double* prow = probs.data() + static_cast<size_t>(r) * C;
    double mx = *std::max_element(row, row + C);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      prow[c] = std::exp(row[c] - mx);
      sum += prow[c];
    }
    for (int c = 0; c < C; ++c) prow[c] /= sum;
  }
  return probs;
}

}  // namespace

Var cross_entropy(const Var& logits, const std::vector<int>& targets,
                  const std::vector<bool>* mask) {
  check_finite(logits, "cross_entropy");
  int R = logits->rows, C = logits->cols;
  if (static_cast<int>(targets.size()) != R) throw RuntimeError("cross_entropy: target count");
  if (mask && static_cast<int>(mask->size()) != R) throw RuntimeError("cross_entropy: mask length");
  for (int t : targets) {
    if (t < 0 || t >= C) throw RuntimeError("cross_entropy: target id out of range");
  }
  auto probs = std::make_shared<std::vector<double>>(row_softmax(logits));
  int count = 0;
  double loss = 0.0;
  for (int r = 0; r < R; ++r) {
    if (mask && !(*mask)[r]) continue;
    ++count;
    loss -= std::log(std::max((*probs)[static_cast<size_t>(r) * C + targets[r]], 1e-300));
  }
  if (count == 0) throw RuntimeError("no supervised positions");
  auto out = make_node(1, 1, {logits});
  out->val[0] = loss / count;
  auto tgt = std::make_shared<std::vector<int>>(targets);
  std::shared_ptr<std::vector<bool>> msk;
  if (mask) msk = std::make_shared<std::vector<bool>>(*mask);
  out->backward_fn = [probs, tgt, msk, R, C, count](Node& n) {
    Node& logits = *n.parents[0];
    if (!logits.needs_grad) return;
    double up = n.grad[0] / count;
    for (int r = 0; r < R; ++r) {
      if (msk && !(*msk)[r]) continue;
      const double* prow = probs->data() + static_cast<size_t>(r) * C;
      double* drow = logits.grad.data() + static_cast<size_t>(r) * C;
      for (int c = 0; c < C; ++c) drow[c] += up * prow[c];
      drow[(*tgt)[r]] -= up;
    }
  };
  return out;
}

Var cross_entropy_soft(const Var& logits, const std::vector<double>& target_rows) {
  check_finite(logits, "cross_entropy_soft");
  int R = logits->rows, C = logits->cols;
  if (target_rows.size() != logits->size()) {
    throw RuntimeError("cross_entropy_soft: target shape mismatch");
  }
  if (R == 0) throw RuntimeError("no supervised positions");
  auto probs = std::make_shared<std::vector<double>>(row_softmax(logits));
  double loss = 0.0;
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < C; ++c) {
      size_t i = static_cast<size_t>(r) * C + c;
      if (target_rows[i] > 0.0) {
        loss -= target_rows[i] * std::log(std::max((*probs)[i], 1e-300));
      }
    }
  }
  auto out = make_node(1, 1, {logits});
  out->val[0] = loss / R;
  auto tgt = std::make_shared<std::vector<double>>(target_rows);
  out->backward_fn = [probs, tgt, R, C](Node& n) {
    Node& logits = *n.parents[0];
    if (!logits.needs_grad) return;
    double up = n.grad[0] / R;
    for (size_t i = 0; i < logits.grad.size(); ++i) {
      logits.grad[i] += up * ((*probs)[i] - (*tgt)[i]);
    }
  };
  return out;
}

Var multi_head_attention(Graph& g, const Var& q_in, const Var& kv_in,
                         const std::string& prefix, int heads,
                         const Var& rel_table, int rel_clip,
                         const std::vector<bool>* key_mask) {
  int H = q_in->cols;
  if (kv_in->cols != H) throw RuntimeError("attention: hidden size mismatch");
  if (heads <= 0 || H % heads != 0) {
    throw ConfigError("hidden size must be divisible by head count");
  }
  if (rel_table && q_in.get() != kv_in.get()) {
    throw RuntimeError("relative bias requires self-attention");
  }
  int dh = H / heads;
  double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = add_rowvec(matmul(q_in, g.param(prefix + ".wq")), g.param(prefix + ".bq"));
  Var k = add_rowvec(matmul(kv_in, g.param(prefix + ".wk")), g.param(prefix + ".bk"));
  Var v = add_rowvec(matmul(kv_in, g.param(prefix + ".wv")), g.param(prefix + ".bv"));

  std::vector<Var> contexts;
  contexts.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = scale(matmul(qh, kh, false, true), att_scale);
    if (rel_table) scores = add(scores, relative_bias(rel_table, h, q_in->rows, rel_clip));
    Var weights = softmax_rows(scores, key_mask);
    contexts.push_back(matmul(weights, vh));
  }
  Var ctx = heads == 1 ? contexts[0] : concat_cols(contexts);
  return add_rowvec(matmul(ctx, g.param(prefix + ".wo")), g.param(prefix + ".bo"));
}

Var feed_forward(Graph& g, const Var& x, const std::string& prefix, Activation act) {
  Var h = add_rowvec(matmul(x, g.param(prefix + ".w1")), g.param(prefix + ".b1"));
  h = activate(h, act);
  return add_rowvec(matmul(h, g.param(prefix + ".w2")), g.param(prefix + ".b2"));
}

Var encoder_block(Graph& g, const Var& x, const std::string& prefix, int heads,
                  Activation act, const Var& rel_table, int rel_clip,
                  const std::vector<bool>* key_mask, double dropout_p) {
  Var attn = multi_head_attention(g, x, x, prefix + ".attn", heads, rel_table, rel_clip,
                                  key_mask);
  Var x1 = layer_norm(add(x, g.dropout(attn, dropout_p)), g.param(prefix + ".ln1.gamma"),
                      g.param(prefix + ".ln1.beta"));
  Var ff = feed_forward(g, x1, prefix + ".ffn", act);
  return layer_norm(add(x1, g.dropout(ff, dropout_p)), g.param(prefix + ".ln2.gamma"),
                    g.param(prefix + ".ln2.beta"));
}

void backward(const Var& root) {
  if (root->rows != 1 || root->cols != 1) throw RuntimeError("backward: root must be scalar");
  // Iterative post-order DFS for the topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < node->parents.size()) {
      Node* child = node->parents[next_child].get();
      ++next_child;
      if (child->needs_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (n->needs_grad) n->grad.assign(n->size(), 0.0);
  }
  if (!root->needs_grad) return;
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->needs_grad && n->backward_fn) n->backward_fn(*n);
  }
  // Flush leaf gradients into the parameter store.
  for (Node* n : order) {
    if (n->param != nullptr) {
      n->param->tensor.ensure_grad();
      for (size_t i = 0; i < n->grad.size(); ++i) n->param->tensor.grad[i] += n->grad[i];
    }
  }
}

}  // namespace s2s
