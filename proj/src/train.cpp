// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace s2s {

namespace {
enum : uint64_t {
  kTagShuffle = 101,
  kTagSampleNoise = 102,
  kTagDropout = 103,
  kTagPretrain = 104,
};
}

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (negatives < 0) throw ConfigError("negatives must be >= 0");
  if (mask_loss_weight < 0.0) throw ConfigError("mask_loss_weight must be >= 0");
  if (calibration_fraction < 0.0 || calibration_fraction >= 0.5) {
    throw ConfigError("calibration_fraction must be in [0, 0.5)");
  }
}

nlohmann::json TrainReport::to_json() const {
  nlohmann::json ep = nlohmann::json::array();
  for (const auto& e : epochs) {
    ep.push_back({{"matching_loss", e.matching_loss},
                  {"mask_loss", e.mask_loss},
                  {"accuracy", e.accuracy}});
  }
  return nlohmann::json{{"epochs", ep},
                        {"final_train_accuracy", final_train_accuracy},
                        {"theta", theta},
                        {"wall_seconds", wall_seconds}};
}

nlohmann::json PretrainReport::to_json() const {
  return nlohmann::json{{"epoch_losses", epoch_losses}, {"wall_seconds", wall_seconds}};
}

const QueryPattern& LoadedDataset::pattern_by_id(const std::string& id) const {
  for (const auto& p : patterns) {
    if (p.id == id) return p;
  }
  throw DataError("unknown pattern id: " + id);
}

LoadedDataset load_dataset(const std::filesystem::path& dir, int jobs) {
  if (!std::filesystem::exists(dir)) throw DataError("dataset directory not found: " + dir.string());
  LoadedDataset data;
  data.inv = load_inventory(dir / "inventory.txt");
  data.db = load_entity_db(dir / "entities.tsv", data.inv);
  data.patterns = load_patterns(dir / "patterns.tsv", data.inv);
  data.manifest = load_manifest(dir / "manifest.jsonl");
  if (data.manifest.samples.empty()) throw DataError("manifest is empty: " + dir.string());
  data.posteriors.resize(data.manifest.samples.size());
  parallel_for(data.manifest.samples.size(), jobs, [&](size_t i) {
    const Sample& s = data.manifest.samples[i];
    if (!data.db.contains(s.slot_id)) {
      throw DataError("manifest sample '" + s.id + "' names unknown entity '" + s.slot_id + "'");
    }
    data.posteriors[i] = read_posteriorgram(dir / s.posterior_path, data.inv);
    validate_posteriorgram(data.posteriors[i]);
  });
  return data;
}

SampleLoss sample_loss(Graph& g, const Posteriorgram& pg, const Entity& gold,
                       const std::vector<const Entity*>& negatives, const ModelConfig& cfg,
                       double mask_loss_weight, std::mt19937_64& rng) {
  MaskPlan plan = mask_frames(pg.frames, rng);
  auto enc = speech_encode(g, pg, cfg, &plan);

  std::vector<double> mask_targets;
  mask_targets.reserve(plan.frames.size() * cfg.vocab);
  for (int f : plan.frames) {
    const double* row = pg.row(f);
    mask_targets.insert(mask_targets.end(), row, row + cfg.vocab);
  }
  Var mask_ce = cross_entropy_soft(enc.mask_logits, mask_targets);

  CandidateScore gold_score = score_candidate(g, enc.memory, gold, cfg);
  Var match = scale(gold_score.score_var, -1.0);  // == position cross entropy

  SampleLoss out;
  out.gold_ranked_first = true;
  if (!negatives.empty()) {
    std::vector<Var> scores = {gold_score.score_var};
    for (const Entity* neg : negatives) {
      CandidateScore s = score_candidate(g, enc.memory, *neg, cfg);
      if (s.score >= gold_score.score) out.gold_ranked_first = false;
      scores.push_back(s.score_var);
    }
    Var ranking = cross_entropy(concat_cols(scores), {0});
    match = add(match, ranking);
  }
  out.matching_loss = match->scalar();
  out.mask_loss = mask_ce->scalar();
  out.total = mask_loss_weight > 0.0 ? add(match, scale(mask_ce, mask_loss_weight)) : match;
  if (!std::isfinite(out.total->scalar())) throw RuntimeError("non-finite loss");
  return out;
}

namespace {

// Eval-mode greedy decode match, used when training without negatives.
bool greedy_decode_matches(Graph& g, const SpeechMemory& sm, const Entity& gold,
                           const ModelConfig& cfg) {
  Var km = knowledge_encode(g, gold.phonemes, cfg);
  Var logits = bridge_forward(g, km, sm, cfg);
  for (int r = 0; r < logits->rows; ++r) {
    const double* row = logits->val.data() + static_cast<size_t>(r) * logits->cols;
    int best = 0;
    for (int c = 1; c < logits->cols; ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (best != gold.phonemes[r]) return false;
  }
  return true;
}

std::vector<int> train_sample_indices(const Manifest& manifest) {
  std::vector<int> idx;
  for (size_t i = 0; i < manifest.samples.size(); ++i) {
    if (manifest.samples[i].train_split) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

}  // namespace

TrainReport train_model(const LoadedDataset& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg,
                        const std::filesystem::path& out_ckpt) {
  auto t_start = std::chrono::steady_clock::now();
  train_cfg.validate();
  ModelConfig cfg = model_cfg;
  cfg.vocab = data.inv.size();
  cfg.validate();

  std::vector<int> train_idx = train_sample_indices(data.manifest);
  if (train_idx.empty()) throw DataError("manifest has no training samples");

  // Hold out a slice for threshold calibration when the set is big enough.
  int n_cal = 0;
  if (train_cfg.calibration_fraction > 0.0 && static_cast<int>(train_idx.size()) >= 40) {
    n_cal = std::max(10, static_cast<int>(std::lround(train_cfg.calibration_fraction *
                                                      train_idx.size())));
  }
  std::vector<int> cal_idx(train_idx.end() - n_cal, train_idx.end());
  train_idx.resize(train_idx.size() - n_cal);

  // Negatives come from entities visible in training samples.
  std::vector<int> visible_entities;
  {
    std::vector<bool> seen(data.db.size(), false);
    for (int i : train_idx) seen[data.db.position(data.manifest.samples[i].slot_id)] = true;
    for (size_t e = 0; e < data.db.size(); ++e) {
      if (seen[e]) visible_entities.push_back(static_cast<int>(e));
    }
  }

  ParamStore params(train_cfg.seed);
  define_model_params(params, cfg);
  if (!train_cfg.init_knowledge.empty()) {
    load_checkpoint_into(train_cfg.init_knowledge, params);
  }
  if (train_cfg.freeze_knowledge) params.set_trainable_prefix("knowledge.", false);

  TrainReport report;
  AdamConfig adam;
  adam.lr = train_cfg.lr;
  int64_t step = 0;
  const int n = static_cast<int>(train_idx.size());
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::vector<int> order = train_idx;
    auto shuffle_rng = make_rng(train_cfg.seed, kTagShuffle, static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochStats stats;
    int correct = 0;
    for (int b = 0; b < n; b += train_cfg.batch) {
      int batch_n = std::min(train_cfg.batch, n - b);
      params.zero_grads();
      for (int k = 0; k < batch_n; ++k) {
        int si = order[b + k];
        uint64_t stream = static_cast<uint64_t>(epoch) * data.manifest.samples.size() + si;
        auto rng = make_rng(train_cfg.seed, kTagSampleNoise, stream);
        Graph g(&params, /*training=*/true, mix_seed(train_cfg.seed, kTagDropout, stream));

        const Sample& s = data.manifest.samples[si];
        const Entity& gold = data.db.by_id(s.slot_id);
        std::vector<const Entity*> negatives;
        int gold_pos = data.db.position(s.slot_id);
        while (static_cast<int>(negatives.size()) < train_cfg.negatives &&
               static_cast<int>(visible_entities.size()) > 1) {
          int pick = visible_entities[std::uniform_int_distribution<int>(
              0, static_cast<int>(visible_entities.size()) - 1)(rng)];
          if (pick == gold_pos) continue;
          negatives.push_back(&data.db.at(pick));
        }

        SampleLoss loss;
        try {
          loss = sample_loss(g, data.posteriors[si], gold, negatives, cfg,
                             train_cfg.mask_loss_weight, rng);
        } catch (const RuntimeError& e) {
          throw RuntimeError(std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                             ", sample '" + s.id + "')");
        }
        backward(scale(loss.total, 1.0 / batch_n));
        stats.matching_loss += loss.matching_loss;
        stats.mask_loss += loss.mask_loss;
        correct += loss.gold_ranked_first ? 1 : 0;
      }
      adam_step(params, adam, ++step);
    }
    stats.matching_loss /= n;
    stats.mask_loss /= n;
    stats.accuracy = static_cast<double>(correct) / n;
    report.epochs.push_back(stats);
  }

  // Eval-mode pass over the trained samples for the reported accuracy.
  {
    int correct = 0;
    auto rng = make_rng(train_cfg.seed, kTagSampleNoise, 0xfffffffull);
    for (int si : train_idx) {
      Graph g(&params, false, 0);
      const Sample& s = data.manifest.samples[si];
      const Entity& gold = data.db.by_id(s.slot_id);
      auto enc = speech_encode(g, data.posteriors[si], cfg);
      if (train_cfg.negatives > 0) {
        CandidateScore gs = score_candidate(g, enc.memory, gold, cfg);
        bool first = true;
        int gold_pos = data.db.position(s.slot_id);
        std::vector<const Entity*> negatives;
        while (static_cast<int>(negatives.size()) < train_cfg.negatives &&
               static_cast<int>(visible_entities.size()) > 1) {
          int pick = visible_entities[std::uniform_int_distribution<int>(
              0, static_cast<int>(visible_entities.size()) - 1)(rng)];
          if (pick == gold_pos) continue;
          negatives.push_back(&data.db.at(pick));
        }
        for (const Entity* neg : negatives) {
          if (score_candidate(g, enc.memory, *neg, cfg).score >= gs.score) {
            first = false;
            break;
          }
        }
        correct += first ? 1 : 0;
      } else {
        correct += greedy_decode_matches(g, enc.memory, gold, cfg) ? 1 : 0;
      }
    }
    report.final_train_accuracy = train_idx.empty() ? 0.0 : static_cast<double>(correct) / train_idx.size();
  }

  // Threshold: 5th percentile of eval-mode gold scores on the held-out
  // slice (or the training samples when no slice was carved).
  {
    const std::vector<int>& pool = cal_idx.empty() ? train_idx : cal_idx;
    std::vector<double> scores;
    scores.reserve(pool.size());
    for (int si : pool) {
      Graph g(&params, false, 0);
      const Sample& s = data.manifest.samples[si];
      auto enc = speech_encode(g, data.posteriors[si], cfg);
      scores.push_back(score_candidate(g, enc.memory, data.db.by_id(s.slot_id), cfg).score);
    }
    std::sort(scores.begin(), scores.end());
    size_t idx = static_cast<size_t>(0.05 * (scores.size() - 1));
    report.theta = scores.empty() ? -std::numeric_limits<double>::infinity() : scores[idx];
  }

  nlohmann::json entities = nlohmann::json::array();
  for (const auto& e : data.db.entities()) {
    entities.push_back({{"id", e.id}, {"ph", e.phonemes}});
  }
  nlohmann::json meta{{"kind", "model"},
                      {"model_config", cfg.to_json()},
                      {"theta", report.theta},
                      {"inventory", data.inv.symbols},
                      {"entities", std::move(entities)},
                      {"train",
                       {{"epochs", train_cfg.epochs},
                        {"lr", train_cfg.lr},
                        {"batch", train_cfg.batch},
                        {"negatives", train_cfg.negatives},
                        {"mask_loss_weight", train_cfg.mask_loss_weight},
                        {"freeze_knowledge", train_cfg.freeze_knowledge},
                        {"seed", train_cfg.seed}}}};
  save_checkpoint(out_ckpt, params, meta);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

int pretrain_mask_count(int len) {
  return std::max(1, static_cast<int>(std::lround(0.15 * len)));
}

PretrainReport pretrain_knowledge(const PhonemeInventory& inv, const EntityDb& db,
                                  const ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const std::filesystem::path& out_ckpt) {
  auto t_start = std::chrono::steady_clock::now();
  cfg.validate();
  if (db.empty()) throw DataError("entity database is empty");
  ModelConfig mc = model_cfg;
  mc.vocab = inv.size();
  mc.validate();

  ParamStore params(cfg.seed);
  define_knowledge_params(params, mc);

  AdamConfig adam;
  adam.lr = cfg.lr;
  PretrainReport report;
  int64_t step = 0;
  const int n = static_cast<int>(db.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    auto shuffle_rng = make_rng(cfg.seed, kTagPretrain, static_cast<uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < n; b += cfg.batch) {
      int batch_n = std::min(cfg.batch, n - b);
      params.zero_grads();
      for (int k = 0; k < batch_n; ++k) {
        int ei = order[b + k];
        auto rng = make_rng(cfg.seed, kTagPretrain,
                            0x10000000ull + static_cast<uint64_t>(epoch) * n + ei);
        const Entity& e = db.at(ei);
        int len = static_cast<int>(e.phonemes.size());
        int m = std::min(pretrain_mask_count(len), len);
        std::vector<int> pos(len);
        for (int i = 0; i < len; ++i) pos[i] = i;
        std::vector<int> masked_pos;
        for (int i = 0; i < m; ++i) {
          std::uniform_int_distribution<int> pick(i, len - 1);
          std::swap(pos[i], pos[pick(rng)]);
          masked_pos.push_back(pos[i]);
        }
        std::sort(masked_pos.begin(), masked_pos.end());
        std::vector<int> tokens = e.phonemes;
        std::vector<int> targets;
        for (int p : masked_pos) {
          targets.push_back(tokens[p]);
          tokens[p] = PhonemeInventory::kPad;
        }
        Graph g(&params, true, mix_seed(cfg.seed, kTagDropout, static_cast<uint64_t>(epoch) * n + ei));
        Var km = knowledge_encode(g, tokens, mc);
        Var logits = add_rowvec(matmul(gather_rows(km, masked_pos),
                                       g.param("knowledge.mask_head.w")),
                                g.param("knowledge.mask_head.b"));
        Var loss = cross_entropy(logits, targets);
        if (!std::isfinite(loss->scalar())) {
          throw RuntimeError("non-finite loss (pretraining epoch " + std::to_string(epoch) + ")");
        }
        epoch_loss += loss->scalar();
        backward(scale(loss, 1.0 / batch_n));
      }
      adam_step(params, adam, ++step);
    }
    report.epoch_losses.push_back(epoch_loss / n);
  }

  nlohmann::json meta{{"kind", "knowledge-pretrain"},
                      {"model_config", mc.to_json()},
                      {"inventory", inv.symbols}};
  save_checkpoint(out_ckpt, params, meta);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

}  // namespace s2s
