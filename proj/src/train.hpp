// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "model.hpp"
#include "synth.hpp"

namespace s2s {

struct TrainConfig {
  double lr = 3e-4;
  int epochs = 10;
  int batch = 16;
  double mask_loss_weight = 1.0;
  int negatives = 4;
  bool freeze_knowledge = false;
  uint64_t seed = 42;
  std::string init_knowledge;  // optional pretrained knowledge checkpoint
  double calibration_fraction = 0.05;

  void validate() const;
};

struct EpochStats {
  double matching_loss = 0.0;
  double mask_loss = 0.0;
  double accuracy = 0.0;  // gold ranked above every sampled negative
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_train_accuracy = 0.0;  // eval-mode, over the trained samples
  double theta = 0.0;                 // calibrated score threshold
  double wall_seconds = 0.0;
  nlohmann::json to_json() const;
};

// A dataset directory as written by build_dataset: inventory, entities,
// patterns, manifest, posteriors.
struct LoadedDataset {
  PhonemeInventory inv;
  EntityDb db;
  std::vector<QueryPattern> patterns;
  Manifest manifest;
  std::vector<Posteriorgram> posteriors;  // parallel to manifest.samples

  const QueryPattern& pattern_by_id(const std::string& id) const;
};

LoadedDataset load_dataset(const std::filesystem::path& dir, int jobs = 0);

// Composite loss for one sample: per-position cross entropy of the gold
// phonemes under the bridge logits, plus a candidate-ranking term over
// sampled negatives, plus the weighted masked-frame reconstruction loss.
struct SampleLoss {
  Var total;
  double matching_loss = 0.0;  // position CE + ranking term
  double mask_loss = 0.0;
  bool gold_ranked_first = false;
};

SampleLoss sample_loss(Graph& g, const Posteriorgram& pg, const Entity& gold,
                       const std::vector<const Entity*>& negatives, const ModelConfig& cfg,
                       double mask_loss_weight, std::mt19937_64& rng);

// Full optimization over the manifest's train split. Writes a checkpoint
// embedding the model config, inventory, entity db and the calibrated
// score threshold, then returns the report. Bit-reproducible for a fixed
// (dataset, configs, seed).
TrainReport train_model(const LoadedDataset& data, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg,
                        const std::filesystem::path& out_ckpt);

struct PretrainReport {
  std::vector<double> epoch_losses;
  double wall_seconds = 0.0;
  nlohmann::json to_json() const;
};

// Masked-phoneme reconstruction over the entity database; emits a
// knowledge-encoder-only checkpoint loadable by train_model.
PretrainReport pretrain_knowledge(const PhonemeInventory& inv, const EntityDb& db,
                                  const ModelConfig& model_cfg, const TrainConfig& cfg,
                                  const std::filesystem::path& out_ckpt);

// Number of masked positions used by the reconstruction objective.
int pretrain_mask_count(int len);

}  // namespace s2s
