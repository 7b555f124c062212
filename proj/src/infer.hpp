// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "model.hpp"
#include "trie.hpp"

namespace s2s {

struct InferOptions {
  // NaN means "use the calibrated threshold from the checkpoint".
  double threshold = std::numeric_limits<double>::quiet_NaN();
  int edit_budget = 1;
  int top_k = 2;
  int max_candidates = 16;
  // Diagnostic: replace the speech memory with zeros before scoring.
  bool zero_speech = false;
};

struct ScoredCandidate {
  std::string entity_id;
  double score = 0.0;
  int edit_cost = 0;
  int start_frame = -1;
  int end_frame = -1;
};

struct InferenceResult {
  std::string best_id;  // empty when no slot was accepted
  double score = 0.0;
  int span_start = -1;
  int span_end = -1;
  std::vector<ScoredCandidate> candidates;

  bool accepted() const { return !best_id.empty(); }
  nlohmann::json to_json() const;
};

// A loaded model plus the closed entity world it matches against. The
// trie proposes candidate spans; the network ranks the candidates.
class Engine {
 public:
  static Engine load(const std::filesystem::path& ckpt_path);
  static Engine from_parts(PhonemeInventory inv, EntityDb db, ParamStore params,
                           ModelConfig cfg, double theta);

  const PhonemeInventory& inventory() const { return inv_; }
  const EntityDb& entities() const { return db_; }
  const ModelConfig& config() const { return cfg_; }
  double theta() const { return theta_; }

  // Safe to call concurrently; parameters are only read.
  InferenceResult infer(const Posteriorgram& pg, const InferOptions& opts = {}) const;

 private:
  Engine() = default;
  PhonemeInventory inv_;
  EntityDb db_;
  Trie trie_;
  mutable ParamStore params_;
  ModelConfig cfg_;
  double theta_ = 0.0;
};

}  // namespace s2s
