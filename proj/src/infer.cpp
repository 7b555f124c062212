// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "infer.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace s2s {

nlohmann::json InferenceResult::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : candidates) {
    cands.push_back({{"entity_id", c.entity_id},
                     {"score", c.score},
                     {"cost", c.edit_cost},
                     {"start", c.start_frame},
                     {"end", c.end_frame}});
  }
  nlohmann::json j;
  if (accepted()) {
    j["best"] = best_id;
    j["score"] = score;
    j["span"] = {span_start, span_end};
  } else {
    j["best"] = nullptr;
    j["score"] = nullptr;
    j["span"] = nullptr;
  }
  j["candidates"] = std::move(cands);
  return j;
}

Engine Engine::load(const std::filesystem::path& ckpt_path) {
  Engine e;
  nlohmann::json meta = load_checkpoint(ckpt_path, e.params_);
  try {
    if (meta.at("kind").get<std::string>() != "model") {
      throw DataError("checkpoint is not a full model: " + ckpt_path.string());
    }
    e.cfg_ = ModelConfig::from_json(meta.at("model_config"));
    e.theta_ = meta.at("theta").get<double>();
    e.inv_ = PhonemeInventory::from_symbols(meta.at("inventory").get<std::vector<std::string>>());
    for (const auto& je : meta.at("entities")) {
      Entity ent;
      ent.id = je.at("id").get<std::string>();
      ent.phonemes = je.at("ph").get<std::vector<int>>();
      e.db_.add(std::move(ent));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("checkpoint metadata incomplete: " + std::string(ex.what()));
  }
  if (e.inv_.size() != e.cfg_.vocab) {
    throw DataError("checkpoint inventory does not match model vocabulary");
  }
  e.trie_ = build_trie(e.db_);
  return e;
}

Engine Engine::from_parts(PhonemeInventory inv, EntityDb db, ParamStore params,
                          ModelConfig cfg, double theta) {
  Engine e;
  e.inv_ = std::move(inv);
  e.db_ = std::move(db);
  e.params_ = std::move(params);
  e.cfg_ = std::move(cfg);
  e.theta_ = theta;
  if (e.inv_.size() != e.cfg_.vocab) {
    throw DataError("inventory does not match model vocabulary");
  }
  e.trie_ = build_trie(e.db_);
  return e;
}

InferenceResult Engine::infer(const Posteriorgram& pg, const InferOptions& opts) const {
  if (pg.phones != inv_.size()) {
    throw DataError("posteriorgram phone count does not match the engine inventory");
  }
  CollapsedPath path = collapse_path(pg, opts.top_k);
  std::vector<SpanCandidate> spans =
      detect_spans(path, trie_, opts.edit_budget, opts.max_candidates);

  InferenceResult res;
  if (spans.empty()) return res;

  // One scoring pass per distinct entity; the first (best-ordered) span
  // of each entity is the one reported.
  Graph g(&params_, false, 0);
  auto enc = speech_encode(g, pg, cfg_);
  SpeechMemory memory = enc.memory;
  if (opts.zero_speech) {
    memory.states = constant(memory.states->rows, memory.states->cols,
                             std::vector<double>(memory.states->size(), 0.0));
  }

  std::vector<ScoredCandidate> scored;
  for (const auto& span : spans) {
    bool seen = false;
    for (const auto& s : scored) {
      if (s.entity_id == span.entity_id) {
        seen = true;
        break;
      }
    }
    if (seen) continue;
    ScoredCandidate c;
    c.entity_id = span.entity_id;
    c.edit_cost = span.edit_cost;
    c.start_frame = span.start_frame;
    c.end_frame = span.end_frame;
    c.score = score_candidate(g, memory, db_.by_id(span.entity_id), cfg_).score;
    scored.push_back(std::move(c));
  }

  const ScoredCandidate* best = nullptr;
  for (const auto& c : scored) {
    if (!best || c.score > best->score ||
        (c.score == best->score && (c.edit_cost < best->edit_cost ||
                                    (c.edit_cost == best->edit_cost &&
                                     c.entity_id < best->entity_id)))) {
      best = &c;
    }
  }
  res.candidates = scored;
  double theta = std::isnan(opts.threshold) ? theta_ : opts.threshold;
  if (best && best->score >= theta) {
    res.best_id = best->entity_id;
    res.score = best->score;
    res.span_start = best->start_frame;
    res.span_end = best->end_frame;
  }
  return res;
}

}  // namespace s2s
