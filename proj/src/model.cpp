// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace s2s {

ModelConfig ModelConfig::desk_preset() {
  ModelConfig cfg;
  cfg.hidden = 64;
  cfg.intermediate = 128;
  cfg.heads = 4;
  cfg.layers_speech = 2;
  cfg.layers_knowledge = 2;
  cfg.layers_bridge = 1;
  return cfg;
}

void ModelConfig::validate() const {
  if (hidden < 1 || intermediate < 1 || heads < 1 || layers_speech < 1 ||
      layers_knowledge < 1 || layers_bridge < 1 || max_speech_len < 1 || max_slot_len < 1 ||
      rel_clip < 0 || vocab < 3) {
    throw ConfigError("model configuration has a non-positive field");
  }
  if (hidden % heads != 0) throw ConfigError("hidden size must be divisible by head count");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
  activation_from_string(activation);
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"hidden", hidden},
                        {"intermediate", intermediate},
                        {"heads", heads},
                        {"layers_speech", layers_speech},
                        {"layers_knowledge", layers_knowledge},
                        {"layers_bridge", layers_bridge},
                        {"max_speech_len", max_speech_len},
                        {"max_slot_len", max_slot_len},
                        {"rel_clip", rel_clip},
                        {"dropout", dropout},
                        {"vocab", vocab},
                        {"activation", activation}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.hidden = j.at("hidden").get<int>();
  cfg.intermediate = j.at("intermediate").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.layers_speech = j.at("layers_speech").get<int>();
  cfg.layers_knowledge = j.at("layers_knowledge").get<int>();
  cfg.layers_bridge = j.at("layers_bridge").get<int>();
  cfg.max_speech_len = j.at("max_speech_len").get<int>();
  cfg.max_slot_len = j.at("max_slot_len").get<int>();
  cfg.rel_clip = j.at("rel_clip").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.vocab = j.at("vocab").get<int>();
  cfg.activation = j.at("activation").get<std::string>();
  cfg.validate();
  return cfg;
}

namespace {

void define_attention(ParamStore& ps, const std::string& prefix, int hidden, bool rel,
                      int heads, int rel_clip) {
  ps.define(prefix + ".wq", {hidden, hidden});
  ps.define(prefix + ".bq", {hidden});
  ps.define(prefix + ".wk", {hidden, hidden});
  ps.define(prefix + ".bk", {hidden});
  ps.define(prefix + ".wv", {hidden, hidden});
  ps.define(prefix + ".bv", {hidden});
  ps.define(prefix + ".wo", {hidden, hidden});
  ps.define(prefix + ".bo", {hidden});
  if (rel) ps.define(prefix + ".rel", {heads, 2 * rel_clip + 1});
}

void define_block(ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                  bool rel) {
  define_attention(ps, prefix + ".attn", cfg.hidden, rel, cfg.heads, cfg.rel_clip);
  ps.define(prefix + ".ln1.gamma", {cfg.hidden});
  ps.define(prefix + ".ln1.beta", {cfg.hidden});
  ps.define(prefix + ".ffn.w1", {cfg.hidden, cfg.intermediate});
  ps.define(prefix + ".ffn.b1", {cfg.intermediate});
  ps.define(prefix + ".ffn.w2", {cfg.intermediate, cfg.hidden});
  ps.define(prefix + ".ffn.b2", {cfg.hidden});
  ps.define(prefix + ".ln2.gamma", {cfg.hidden});
  ps.define(prefix + ".ln2.beta", {cfg.hidden});
}

// Deterministic initialization pass over everything defined so far.
void init_params(ParamStore& ps) {
  auto rng = make_rng(ps.rng_seed(), kTagInit);
  for (size_t i = 0; i < ps.size(); ++i) {
    ParamEntry& e = ps.at(i);
    const std::string& name = e.name;
    auto ends_with = [&](const char* suffix) {
      size_t n = std::string(suffix).size();
      return name.size() >= n && name.compare(name.size() - n, n, suffix) == 0;
    };
    if (ends_with(".embed")) {
      init_normal(e.tensor, rng, 0.02);
    } else if (ends_with(".gamma")) {
      init_constant(e.tensor, 1.0);
    } else if (ends_with(".beta") || ends_with(".rel") || e.tensor.shape.size() == 1) {
      init_constant(e.tensor, 0.0);
    } else {
      init_glorot_uniform(e.tensor, rng);
    }
  }
}

}  // namespace

void define_knowledge_params(ParamStore& ps, const ModelConfig& cfg) {
  cfg.validate();
  ps.define("knowledge.embed", {cfg.vocab, cfg.hidden});
  for (int i = 0; i < cfg.layers_knowledge; ++i) {
    define_block(ps, "knowledge.l" + std::to_string(i), cfg, true);
  }
  ps.define("knowledge.mask_head.w", {cfg.hidden, cfg.vocab});
  ps.define("knowledge.mask_head.b", {cfg.vocab});
  init_params(ps);
}

void define_model_params(ParamStore& ps, const ModelConfig& cfg) {
  cfg.validate();
  ps.define("speech.embed", {cfg.vocab, cfg.hidden});
  for (int i = 0; i < cfg.layers_speech; ++i) {
    define_block(ps, "speech.l" + std::to_string(i), cfg, true);
  }
  ps.define("speech.mask_head.w", {cfg.hidden, cfg.vocab});
  ps.define("speech.mask_head.b", {cfg.vocab});
  ps.define("knowledge.embed", {cfg.vocab, cfg.hidden});
  for (int i = 0; i < cfg.layers_knowledge; ++i) {
    define_block(ps, "knowledge.l" + std::to_string(i), cfg, true);
  }
  ps.define("knowledge.mask_head.w", {cfg.hidden, cfg.vocab});
  ps.define("knowledge.mask_head.b", {cfg.vocab});
  for (int i = 0; i < cfg.layers_bridge; ++i) {
    define_block(ps, "bridge.l" + std::to_string(i), cfg, false);
  }
  ps.define("bridge.out.w", {cfg.hidden, cfg.vocab});
  ps.define("bridge.out.b", {cfg.vocab});
  init_params(ps);
}

MaskPlan mask_frames(int T, std::mt19937_64& rng) {
  if (T < 1) throw RuntimeError("mask_frames: need at least one frame");
  std::uniform_real_distribution<double> frac_dist(0.10, 0.15);
  double f = frac_dist(rng);
  int count = std::max(1, static_cast<int>(std::lround(f * T)));
  count = std::min(count, T);
  // Partial Fisher-Yates draw without replacement.
  std::vector<int> pool(T);
  for (int i = 0; i < T; ++i) pool[i] = i;
  MaskPlan plan;
  plan.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::uniform_int_distribution<int> pick(i, T - 1);
    std::swap(pool[i], pool[pick(rng)]);
    plan.frames.push_back(pool[i]);
  }
  std::sort(plan.frames.begin(), plan.frames.end());
  return plan;
}

Posteriorgram apply_mask_plan(const Posteriorgram& pg, const MaskPlan& plan) {
  Posteriorgram out = pg;
  for (int t : plan.frames) {
    if (t < 0 || t >= pg.frames) throw RuntimeError("mask plan frame out of range");
    double* row = out.rows.data() + static_cast<size_t>(t) * out.phones;
    std::fill(row, row + out.phones, 0.0);
    row[PhonemeInventory::kPad] = 1.0;
  }
  return out;
}

SpeechEncodeResult speech_encode(Graph& g, const Posteriorgram& pg, const ModelConfig& cfg,
                                 const MaskPlan* plan, const std::vector<bool>* frame_mask) {
  if (pg.frames > cfg.max_speech_len) {
    throw DataError("posteriorgram has " + std::to_string(pg.frames) +
                    " frames, model limit is " + std::to_string(cfg.max_speech_len));
  }
  if (pg.phones != cfg.vocab) {
    throw DataError("posteriorgram phone count does not match model vocabulary");
  }
  Posteriorgram input = plan ? apply_mask_plan(pg, *plan) : pg;
  Var x = constant(input.frames, input.phones, input.rows);
  x = matmul(x, g.param("speech.embed"));

  SpeechEncodeResult res;
  res.memory.frame_mask =
      frame_mask ? *frame_mask : std::vector<bool>(static_cast<size_t>(pg.frames), true);
  if (static_cast<int>(res.memory.frame_mask.size()) != pg.frames) {
    throw RuntimeError("frame mask length mismatch");
  }
  Activation act = activation_from_string(cfg.activation);
  for (int i = 0; i < cfg.layers_speech; ++i) {
    std::string prefix = "speech.l" + std::to_string(i);
    Var rel = g.param(prefix + ".attn.rel");
    x = encoder_block(g, x, prefix, cfg.heads, act, rel, cfg.rel_clip,
                      &res.memory.frame_mask, cfg.dropout);
  }
  res.memory.states = x;
  if (plan) {
    if (plan->frames.empty()) throw RuntimeError("empty mask plan");
    Var hidden = gather_rows(x, plan->frames);
    res.mask_logits =
        add_rowvec(matmul(hidden, g.param("speech.mask_head.w")), g.param("speech.mask_head.b"));
  }
  return res;
}

Var knowledge_encode(Graph& g, const std::vector<int>& phonemes, const ModelConfig& cfg) {
  if (phonemes.empty()) throw DataError("knowledge_encode: empty phoneme sequence");
  if (static_cast<int>(phonemes.size()) > cfg.max_slot_len) {
    throw DataError("slot phoneme sequence longer than model limit " +
                    std::to_string(cfg.max_slot_len));
  }
  for (int p : phonemes) {
    if (p < 0 || p >= cfg.vocab) throw DataError("knowledge_encode: phoneme index out of range");
  }
  Var x = gather_rows(g.param("knowledge.embed"), phonemes);
  Activation act = activation_from_string(cfg.activation);
  for (int i = 0; i < cfg.layers_knowledge; ++i) {
    std::string prefix = "knowledge.l" + std::to_string(i);
    Var rel = g.param(prefix + ".attn.rel");
    x = encoder_block(g, x, prefix, cfg.heads, act, rel, cfg.rel_clip, nullptr, cfg.dropout);
  }
  return x;
}

Var bridge_forward(Graph& g, const Var& knowledge_memory, const SpeechMemory& speech,
                   const ModelConfig& cfg) {
  if (!speech.states) throw RuntimeError("bridge_forward: missing speech memory");
  if (knowledge_memory->cols != cfg.hidden || speech.states->cols != cfg.hidden) {
    throw RuntimeError("bridge_forward: hidden size mismatch");
  }
  Activation act = activation_from_string(cfg.activation);
  Var h = knowledge_memory;
  for (int i = 0; i < cfg.layers_bridge; ++i) {
    std::string prefix = "bridge.l" + std::to_string(i);
    Var attn = multi_head_attention(g, h, speech.states, prefix + ".attn", cfg.heads, nullptr,
                                    0, &speech.frame_mask);
    // No additive path from h: the only route from the candidate into the
    // block output is through the attention query.
    h = layer_norm(g.dropout(attn, cfg.dropout), g.param(prefix + ".ln1.gamma"),
                   g.param(prefix + ".ln1.beta"));
    Var ff = feed_forward(g, h, prefix + ".ffn", act);
    h = layer_norm(add(h, g.dropout(ff, cfg.dropout)), g.param(prefix + ".ln2.gamma"),
                   g.param(prefix + ".ln2.beta"));
  }
  return add_rowvec(matmul(h, g.param("bridge.out.w")), g.param("bridge.out.b"));
}

CandidateScore score_candidate(Graph& g, const SpeechMemory& speech, const Entity& entity,
                               const ModelConfig& cfg) {
  Var km = knowledge_encode(g, entity.phonemes, cfg);
  Var logits = bridge_forward(g, km, speech, cfg);
  CandidateScore out;
  out.score_var = scale(cross_entropy(logits, entity.phonemes), -1.0);
  out.score = out.score_var->scalar();
  out.position_log_probs.reserve(entity.phonemes.size());
  // Per-position log-probabilities for reporting.
  int V = logits->cols;
  for (int r = 0; r < logits->rows; ++r) {
    const double* row = logits->val.data() + static_cast<size_t>(r) * V;
    double mx = *std::max_element(row, row + V);
    double sum = 0.0;
    for (int c = 0; c < V; ++c) sum += std::exp(row[c] - mx);
    out.position_log_probs.push_back(row[entity.phonemes[r]] - mx - std::log(sum));
  }
  return out;
}

}  // namespace s2s
