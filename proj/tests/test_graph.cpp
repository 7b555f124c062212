// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "graph.hpp"
#include "oracles.hpp"

using namespace s2s;

namespace {

// Central-difference check of d loss / d param against the analytic
// gradient accumulated in the store.
double max_rel_err_fd(ParamStore& ps, const std::function<double(bool)>& loss_fn,
                      double h = 1e-5) {
  ps.zero_grads();
  loss_fn(true);
  double worst = 0.0;
  for (size_t pi = 0; pi < ps.size(); ++pi) {
    Tensor& t = ps.at(pi).tensor;
    for (size_t c = 0; c < t.data.size(); ++c) {
      double saved = t.data[c];
      t.data[c] = saved + h;
      double lp = loss_fn(false);
      t.data[c] = saved - h;
      double lm = loss_fn(false);
      t.data[c] = saved;
      double numeric = (lp - lm) / (2 * h);
      double analytic = t.grad.empty() ? 0.0 : t.grad[c];
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax of a constant row is uniform") {
  Var x = constant(1, 3, {0.0, 0.0, 0.0});
  Var y = softmax_rows(x);
  for (int c = 0; c < 3; ++c) CHECK(y->val[c] == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("softmax matches the scalar reference") {
  auto ref = oracle::softmax_reference({1.0, 2.0, 3.0});
  Var y = softmax_rows(constant(1, 3, {1.0, 2.0, 3.0}));
  for (int c = 0; c < 3; ++c) CHECK(y->val[c] == doctest::Approx(ref[c]).epsilon(1e-10));
  // Values pinned against an independently computed reference.
  CHECK(y->val[0] == doctest::Approx(0.09003).epsilon(1e-4));
  CHECK(y->val[1] == doctest::Approx(0.24473).epsilon(1e-4));
  CHECK(y->val[2] == doctest::Approx(0.66524).epsilon(1e-4));
}

TEST_CASE("softmax is stable under large logits") {
  Var y = softmax_rows(constant(1, 3, {1000.0, 0.0, 0.0}));
  CHECK(std::isfinite(y->val[0]));
  CHECK(y->val[0] == doctest::Approx(1.0));
  CHECK(y->val[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax rejects non-finite input") {
  Var x = constant(1, 2, {std::nan(""), 0.0});
  CHECK_THROWS_WITH_AS(softmax_rows(x), doctest::Contains("non-finite input"), RuntimeError);
}

TEST_CASE("softmax rows sum to one on random input") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int r = 1 + trial % 5, c = 2 + trial % 7;
    Var x = constant(r, c, oracle::random_vector(rng, static_cast<size_t>(r) * c, 3.0));
    Var y = softmax_rows(x);
    for (int i = 0; i < r; ++i) {
      double sum = 0.0;
      for (int j = 0; j < c; ++j) sum += y->at(i, j);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("masked softmax puts exactly zero on masked columns") {
  std::vector<bool> mask = {true, false, true, false};
  Var y = softmax_rows(constant(2, 4, {5, 100, 1, 100, 0, 100, 0, 100}), &mask);
  for (int r = 0; r < 2; ++r) {
    CHECK(y->at(r, 1) == 0.0);
    CHECK(y->at(r, 3) == 0.0);
    CHECK(y->at(r, 0) + y->at(r, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("layer_norm maps a constant row to beta") {
  ParamStore ps;
  Graph g(&ps);
  Var x = constant(1, 3, {2.0, 2.0, 2.0});
  Var gamma = constant(1, 3, {1.0, 1.0, 1.0});
  Var beta = constant(1, 3, {0.0, 0.0, 0.0});
  Var y = layer_norm(x, gamma, beta);
  for (int c = 0; c < 3; ++c) CHECK(y->val[c] == doctest::Approx(0.0));

  Var beta5 = constant(1, 2, {5.0, 5.0});
  Var y2 = layer_norm(constant(1, 2, {0.0, 0.0}), constant(1, 2, {1.0, 1.0}), beta5);
  CHECK(y2->val[0] == doctest::Approx(5.0));
  CHECK(y2->val[1] == doctest::Approx(5.0));
}

TEST_CASE("layer_norm leaves a zero-mean unit-variance row in place as eps -> 0") {
  Var y = layer_norm(constant(1, 2, {1.0, -1.0}), constant(1, 2, {1.0, 1.0}),
                     constant(1, 2, {0.0, 0.0}), 1e-12);
  CHECK(y->val[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(y->val[1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm output statistics") {
  std::mt19937_64 rng(5);
  Var x = constant(6, 16, oracle::random_vector(rng, 96, 2.0));
  Var y = layer_norm(x, constant(1, 16, std::vector<double>(16, 1.0)),
                     constant(1, 16, std::vector<double>(16, 0.0)), 1e-9);
  for (int r = 0; r < 6; ++r) {
    double mean = 0.0, var = 0.0;
    for (int c = 0; c < 16; ++c) mean += y->at(r, c);
    mean /= 16;
    for (int c = 0; c < 16; ++c) var += (y->at(r, c) - mean) * (y->at(r, c) - mean);
    var /= 16;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("attention with a single key row copies its value for every query") {
  std::mt19937_64 rng(7);
  ParamStore ps;
  Graph g(&ps);
  for (const char* n : {"a.wq", "a.wk", "a.wv", "a.wo"}) {
    Tensor& t = ps.define(n, {8, 8});
    t.data = oracle::random_vector(rng, 64, 0.4);
  }
  for (const char* n : {"a.bq", "a.bk", "a.bv", "a.bo"}) ps.define(n, {8});
  Var q_in = constant(3, 8, oracle::random_vector(rng, 24));
  Var kv = constant(1, 8, oracle::random_vector(rng, 8));
  Var out = multi_head_attention(g, q_in, kv, "a", 2, nullptr, 0, nullptr);
  // Context is the single value row regardless of the query.
  for (int r = 1; r < 3; ++r) {
    for (int c = 0; c < 8; ++c) CHECK(out->at(r, c) == doctest::Approx(out->at(0, c)));
  }
}

TEST_CASE("attention with identical key rows averages values uniformly") {
  std::mt19937_64 rng(9);
  ParamStore ps;
  Graph g(&ps);
  for (const char* n : {"a.wq", "a.wk", "a.wv", "a.wo"}) {
    Tensor& t = ps.define(n, {4, 4});
    t.data = oracle::random_vector(rng, 16, 0.4);
  }
  for (const char* n : {"a.bq", "a.bk", "a.bv", "a.bo"}) ps.define(n, {4});
  // Same key row repeated: weights must be uniform, so the context equals
  // the mean value row whatever the query is.
  std::vector<double> row = oracle::random_vector(rng, 4);
  std::vector<double> kv_rows;
  for (int i = 0; i < 3; ++i) kv_rows.insert(kv_rows.end(), row.begin(), row.end());
  Var q_in = constant(2, 4, oracle::random_vector(rng, 8));
  Var kv = constant(3, 4, kv_rows);
  Var out = multi_head_attention(g, q_in, kv, "a", 1, nullptr, 0, nullptr);
  for (int c = 0; c < 4; ++c) CHECK(out->at(0, c) == doctest::Approx(out->at(1, c)));
}

TEST_CASE("single-head attention matches a hand-rolled reference") {
  std::mt19937_64 rng(13);
  ParamStore ps;
  Graph g(&ps);
  const int H = 4, Lq = 3, Lk = 5;
  std::map<std::string, std::vector<double>> w;
  for (const char* n : {"a.wq", "a.wk", "a.wv", "a.wo"}) {
    Tensor& t = ps.define(n, {H, H});
    t.data = oracle::random_vector(rng, H * H, 0.5);
    w[n] = t.data;
  }
  for (const char* n : {"a.bq", "a.bk", "a.bv", "a.bo"}) {
    Tensor& t = ps.define(n, {H});
    t.data = oracle::random_vector(rng, H, 0.2);
    w[n] = t.data;
  }
  std::vector<double> qv = oracle::random_vector(rng, Lq * H);
  std::vector<double> kvv = oracle::random_vector(rng, Lk * H);
  Var out = multi_head_attention(g, constant(Lq, H, qv), constant(Lk, H, kvv), "a", 1,
                                 nullptr, 0, nullptr);

  auto project = [&](const std::vector<double>& x, int rows, const char* wn, const char* bn) {
    std::vector<double> y(static_cast<size_t>(rows) * H, 0.0);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < H; ++j) {
        long double acc = w[bn][j];
        for (int k = 0; k < H; ++k) acc += x[i * H + k] * w[wn][k * H + j];
        y[i * H + j] = static_cast<double>(acc);
      }
    }
    return y;
  };
  auto Q = project(qv, Lq, "a.wq", "a.bq");
  auto K = project(kvv, Lk, "a.wk", "a.bk");
  auto V = project(kvv, Lk, "a.wv", "a.bv");
  for (int i = 0; i < Lq; ++i) {
    std::vector<double> scores(Lk);
    for (int j = 0; j < Lk; ++j) {
      long double acc = 0.0;
      for (int k = 0; k < H; ++k) acc += Q[i * H + k] * K[j * H + k];
      scores[j] = static_cast<double>(acc / std::sqrt(static_cast<double>(H)));
    }
    auto weights = oracle::softmax_reference(scores);
    std::vector<double> ctx(H, 0.0);
    for (int j = 0; j < Lk; ++j) {
      for (int k = 0; k < H; ++k) ctx[k] += weights[j] * V[j * H + k];
    }
    for (int c = 0; c < H; ++c) {
      long double acc = w["a.bo"][c];
      for (int k = 0; k < H; ++k) acc += ctx[k] * w["a.wo"][k * H + c];
      CHECK(out->at(i, c) == doctest::Approx(static_cast<double>(acc)).epsilon(1e-9));
    }
  }
}

TEST_CASE("attention head count must divide the hidden size") {
  ParamStore ps;
  Graph g(&ps);
  Var x = constant(2, 6, std::vector<double>(12, 0.1));
  CHECK_THROWS_AS(multi_head_attention(g, x, x, "a", 4, nullptr, 0, nullptr), ConfigError);
}

TEST_CASE("feed_forward with zero weights returns the bias, identity recovers input") {
  ParamStore ps;
  Graph g(&ps);
  const int H = 3, I = 4;
  ps.define("f.w1", {H, I});
  ps.define("f.b1", {I});
  ps.define("f.w2", {I, H});
  ps.define("f.b2", {H});
  Var x = constant(2, H, {1, 2, 3, 4, 5, 6});
  Var zero = feed_forward(g, x, "f", Activation::Gelu);
  for (double v : zero->val) CHECK(v == 0.0);

  // Identity-like weights with the linear activation reproduce x.
  Tensor& w1 = ps.tensor("f.w1");
  Tensor& w2 = ps.tensor("f.w2");
  for (int i = 0; i < H; ++i) w1.data[static_cast<size_t>(i) * I + i] = 1.0;
  for (int i = 0; i < H; ++i) w2.data[static_cast<size_t>(i) * H + i] = 1.0;
  Graph g2(&ps);
  Var y = feed_forward(g2, x, "f", Activation::Identity);
  for (size_t i = 0; i < x->size(); ++i) CHECK(y->val[i] == doctest::Approx(x->val[i]));
  CHECK(y->rows == 2);
  CHECK(y->cols == H);
}

TEST_CASE("encoder block with zeroed output projections is LayerNorm(LayerNorm(x))") {
  std::mt19937_64 rng(21);
  ParamStore ps(3);
  Graph g(&ps);
  const int H = 8;
  for (const char* n : {"e.attn.wq", "e.attn.wk", "e.attn.wv"}) {
    Tensor& t = ps.define(n, {H, H});
    t.data = oracle::random_vector(rng, H * H, 0.4);
  }
  ps.define("e.attn.wo", {H, H});  // zero
  for (const char* n : {"e.attn.bq", "e.attn.bk", "e.attn.bv", "e.attn.bo"}) ps.define(n, {H});
  Tensor& g1 = ps.define("e.ln1.gamma", {H});
  init_constant(g1, 1.0);
  ps.define("e.ln1.beta", {H});
  Tensor& w1 = ps.define("e.ffn.w1", {H, 2 * H});
  w1.data = oracle::random_vector(rng, w1.data.size(), 0.4);
  ps.define("e.ffn.b1", {2 * H});
  ps.define("e.ffn.w2", {2 * H, H});  // zero
  ps.define("e.ffn.b2", {H});
  Tensor& g2t = ps.define("e.ln2.gamma", {H});
  init_constant(g2t, 1.0);
  ps.define("e.ln2.beta", {H});

  Var x = constant(4, H, oracle::random_vector(rng, 4 * H, 1.5));
  Var out = encoder_block(g, x, "e", 2, Activation::Gelu, nullptr, 0, nullptr, 0.0);
  Var expected = layer_norm(layer_norm(x, g.param("e.ln1.gamma"), g.param("e.ln1.beta")),
                            g.param("e.ln2.gamma"), g.param("e.ln2.beta"));
  REQUIRE(out->size() == expected->size());
  for (size_t i = 0; i < out->size(); ++i) {
    CHECK(out->val[i] == doctest::Approx(expected->val[i]).epsilon(1e-12));
  }
  CHECK(out->rows == 4);
  CHECK(out->cols == H);
}

TEST_CASE("encoder block gradients match finite differences across seeds") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    std::mt19937_64 rng(seed);
    ParamStore ps(seed);
    const int H = 6, heads = 2, I = 8, L = 3, clip = 2;
    std::string p = "e";
    for (const char* n : {".attn.wq", ".attn.wk", ".attn.wv", ".attn.wo"}) {
      Tensor& t = ps.define(p + n, {H, H});
      t.data = oracle::random_vector(rng, t.data.size(), 0.5);
    }
    for (const char* n : {".attn.bq", ".attn.bk", ".attn.bv", ".attn.bo"}) {
      Tensor& t = ps.define(p + n, {H});
      t.data = oracle::random_vector(rng, t.data.size(), 0.1);
    }
    Tensor& rel = ps.define("e.attn.rel", {heads, 2 * clip + 1});
    rel.data = oracle::random_vector(rng, rel.data.size(), 0.3);
    Tensor& g1 = ps.define("e.ln1.gamma", {H});
    g1.data = oracle::random_vector(rng, H, 0.2);
    for (double& v : g1.data) v += 1.0;
    ps.define("e.ln1.beta", {H}).data = oracle::random_vector(rng, H, 0.1);
    ps.define("e.ffn.w1", {H, I}).data = oracle::random_vector(rng, H * I, 0.5);
    ps.define("e.ffn.b1", {I}).data = oracle::random_vector(rng, I, 0.1);
    ps.define("e.ffn.w2", {I, H}).data = oracle::random_vector(rng, H * I, 0.5);
    ps.define("e.ffn.b2", {H}).data = oracle::random_vector(rng, H, 0.1);
    Tensor& g2 = ps.define("e.ln2.gamma", {H});
    g2.data = oracle::random_vector(rng, H, 0.2);
    for (double& v : g2.data) v += 1.0;
    ps.define("e.ln2.beta", {H}).data = oracle::random_vector(rng, H, 0.1);

    std::vector<double> xv = oracle::random_vector(rng, L * H);
    std::vector<double> wv = oracle::random_vector(rng, L * H);
    auto loss_fn = [&](bool compute_grad) {
      Graph g(&ps);
      Var x = constant(L, H, xv);
      Var rel_table = g.param("e.attn.rel");
      Var out = encoder_block(g, x, "e", heads, Activation::Gelu, rel_table, clip, nullptr, 0.0);
      // weighted-sum probe via soft cross entropy keeps the loss scalar
      Var probe = matmul(out, constant(H, 1, std::vector<double>(wv.begin(), wv.begin() + H)));
      Var probe2 = matmul(probe, probe, true, false);  // 1x1 quadratic reduction
      if (compute_grad) backward(probe2);
      return probe2->scalar();
    };
    double err = max_rel_err_fd(ps, loss_fn);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("relative bias expands clipped offsets and backpropagates") {
  ParamStore ps;
  Graph g(&ps);
  Tensor& t = ps.define("rel", {1, 5});  // clip = 2
  t.data = {10, 20, 30, 40, 50};
  Var table = g.param("rel");
  Var b = relative_bias(table, 0, 4, 2);
  CHECK(b->at(0, 0) == 30);  // offset 0
  CHECK(b->at(0, 1) == 40);  // +1
  CHECK(b->at(0, 3) == 50);  // +3 clipped to +2
  CHECK(b->at(3, 0) == 10);  // -3 clipped to -2
  CHECK(b->at(2, 1) == 20);  // -1

  auto loss_fn = [&](bool compute_grad) {
    Graph g2(&ps);
    Var bb = relative_bias(g2.param("rel"), 0, 4, 2);
    Var v = matmul(bb, constant(4, 1, {1, 2, 3, 4}));
    Var s = matmul(v, v, true, false);
    if (compute_grad) backward(s);
    return s->scalar();
  };
  CHECK(max_rel_err_fd(ps, loss_fn) < 1e-6);
}

TEST_CASE("cross entropy examples") {
  // Logit mass forced onto the target drives the loss to zero.
  Var big = constant(1, 3, {1e6, 0.0, 0.0});
  CHECK(cross_entropy(big, {0})->scalar() == doctest::Approx(0.0).epsilon(1e-9));

  // Uniform logits over V=4 give ln 4.
  Var uniform = constant(2, 4, std::vector<double>(8, 0.5));
  CHECK(cross_entropy(uniform, {1, 3})->scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Soft target equal to the predicted distribution yields its entropy.
  std::mt19937_64 rng(31);
  Var logits = constant(3, 5, oracle::random_vector(rng, 15, 2.0));
  std::vector<double> probs;
  for (int r = 0; r < 3; ++r) {
    std::vector<double> row(logits->val.begin() + r * 5, logits->val.begin() + (r + 1) * 5);
    auto p = oracle::softmax_reference(row);
    probs.insert(probs.end(), p.begin(), p.end());
  }
  double loss = cross_entropy_soft(logits, probs)->scalar();
  CHECK(loss == doctest::Approx(oracle::mean_row_entropy(probs, 5)).epsilon(1e-9));
}

TEST_CASE("cross entropy with a fully masked batch is an error") {
  Var logits = constant(2, 3, std::vector<double>(6, 0.0));
  std::vector<bool> mask = {false, false};
  CHECK_THROWS_WITH_AS(cross_entropy(logits, {0, 1}, &mask),
                       doctest::Contains("no supervised positions"), RuntimeError);
}

TEST_CASE("cross entropy gradients match finite differences") {
  std::mt19937_64 rng(41);
  ParamStore ps;
  Tensor& t = ps.define("logits", {4, 6});
  t.data = oracle::random_vector(rng, 24, 1.0);
  std::vector<int> targets = {1, 5, 0, 3};
  std::vector<bool> mask = {true, false, true, true};
  auto loss_fn = [&](bool compute_grad) {
    Graph g(&ps);
    Var l = cross_entropy(g.param("logits"), targets, &mask);
    if (compute_grad) backward(l);
    return l->scalar();
  };
  CHECK(max_rel_err_fd(ps, loss_fn) < 1e-6);

  std::vector<double> soft(24);
  for (int r = 0; r < 4; ++r) {
    std::vector<double> row = oracle::random_vector(rng, 6, 1.0);
    auto p = oracle::softmax_reference(row);
    std::copy(p.begin(), p.end(), soft.begin() + r * 6);
  }
  auto soft_fn = [&](bool compute_grad) {
    Graph g(&ps);
    Var l = cross_entropy_soft(g.param("logits"), soft);
    if (compute_grad) backward(l);
    return l->scalar();
  };
  CHECK(max_rel_err_fd(ps, soft_fn) < 1e-6);
}

TEST_CASE("forward passes are pure") {
  std::mt19937_64 rng(51);
  ParamStore ps(1);
  Tensor& t = ps.define("w", {4, 4});
  t.data = oracle::random_vector(rng, 16);
  std::vector<double> xv = oracle::random_vector(rng, 8);
  auto run = [&]() {
    Graph g(&ps);
    Var out = softmax_rows(matmul(constant(2, 4, xv), g.param("w")));
    return out->val;
  };
  auto a = run();
  auto b = run();
  CHECK(a == b);  // bit-identical
}

TEST_CASE("dropout is identity in eval mode and seeded in train mode") {
  ParamStore ps;
  Var x = constant(2, 3, {1, 2, 3, 4, 5, 6});
  Graph eval_g(&ps, false, 99);
  CHECK(eval_g.dropout(x, 0.5).get() == x.get());

  Graph t1(&ps, true, 99);
  Graph t2(&ps, true, 99);
  auto a = t1.dropout(x, 0.5);
  auto b = t2.dropout(x, 0.5);
  CHECK(a->val == b->val);
}

TEST_CASE("gather, slice and concat round numbers through correctly") {
  Var a = constant(3, 4, {0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23});
  Var rows = gather_rows(a, {2, 0});
  CHECK(rows->at(0, 1) == 21);
  CHECK(rows->at(1, 3) == 3);
  Var cols = slice_cols(a, 1, 2);
  CHECK(cols->at(2, 0) == 21);
  Var cat = concat_cols({cols, slice_cols(a, 0, 1)});
  CHECK(cat->cols == 3);
  CHECK(cat->at(1, 2) == 10);
}
