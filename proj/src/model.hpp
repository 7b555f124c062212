// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0
//
// The slot-matching network: a speech encoder over phoneme posteriors, a
// knowledge encoder over candidate phoneme sequences, and a bridge stack
// that cross-attends from the candidate to the speech memory with the
// query-side residual removed, so every bit of output evidence has to
// flow through the speech representation.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "graph.hpp"
#include "phoneme.hpp"

namespace s2s {

struct ModelConfig {
  int hidden = 576;
  int intermediate = 1600;
  int heads = 8;
  int layers_speech = 4;
  int layers_knowledge = 4;
  int layers_bridge = 2;
  int max_speech_len = 40;
  int max_slot_len = 10;
  int rel_clip = 8;
  double dropout = 0.1;
  int vocab = 0;  // inventory size, set when the inventory is known
  std::string activation = "gelu";

  static ModelConfig desk_preset();
  static ModelConfig full_preset() { return ModelConfig{}; }

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Defines and initializes every parameter of the full model. Insertion
// order is fixed; initialization is a pure function of the store seed.
void define_model_params(ParamStore& params, const ModelConfig& cfg);
// Knowledge-encoder subset, used for standalone pretraining.
void define_knowledge_params(ParamStore& params, const ModelConfig& cfg);

struct MaskPlan {
  std::vector<int> frames;  // sorted, unique
};

// Samples a masking plan covering 10%-15% of T frames (at least one).
MaskPlan mask_frames(int T, std::mt19937_64& rng);

// Returns a copy of pg with every planned frame replaced by the one-hot
// PAD row.
Posteriorgram apply_mask_plan(const Posteriorgram& pg, const MaskPlan& plan);

struct SpeechMemory {
  Var states;                    // T x H
  std::vector<bool> frame_mask;  // true = real frame
};

struct SpeechEncodeResult {
  SpeechMemory memory;
  Var mask_logits;  // |plan| x V when a mask plan was given, else null
};

// Frame embedding is the posterior row times the phoneme embedding
// matrix, which reduces to an ordinary lookup on one-hot rows. Learned
// clipped relative-position biases enter every self-attention layer.
SpeechEncodeResult speech_encode(Graph& g, const Posteriorgram& pg, const ModelConfig& cfg,
                                 const MaskPlan* plan = nullptr,
                                 const std::vector<bool>* frame_mask = nullptr);

Var knowledge_encode(Graph& g, const std::vector<int>& phonemes, const ModelConfig& cfg);

// Bridge stack: h = LayerNorm(CrossAttn(Q=h_prev, K=V=speech)) with no
// additive path from the query input, then h = LayerNorm(h + FFN(h)).
// Returns per-position phoneme logits (L x V).
Var bridge_forward(Graph& g, const Var& knowledge_memory, const SpeechMemory& speech,
                   const ModelConfig& cfg);

struct CandidateScore {
  double score = 0.0;  // mean log-probability of the candidate's phonemes
  std::vector<double> position_log_probs;
  Var score_var;  // scalar node, usable in a larger loss
};

CandidateScore score_candidate(Graph& g, const SpeechMemory& speech, const Entity& entity,
                               const ModelConfig& cfg);

}  // namespace s2s
