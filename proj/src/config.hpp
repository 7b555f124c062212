// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "evalharness.hpp"
#include "synth.hpp"
#include "train.hpp"

namespace s2s {

// One JSON document drives the whole workflow. Sections: inventory,
// entities, patterns, noise, data, model, train, infer, baseline. Every
// field is optional; unknown keys are rejected; paths resolve relative
// to the config file.
struct CliConfig {
  // inventory
  int inventory_phones = 60;
  std::optional<std::filesystem::path> inventory_path;
  // entities: either a file or synthesis parameters
  EntitySynthesisConfig entities;
  std::optional<std::filesystem::path> entities_path;
  bool entities_seed_explicit = false;
  // patterns
  PatternSynthesisConfig patterns;
  std::optional<std::filesystem::path> patterns_path;
  bool patterns_seed_explicit = false;
  // noise + dataset sizing
  NoiseConfig noise;
  bool noise_seed_explicit = false;
  int n_train = 2000;
  int n_test = 200;
  double oov_fraction = 0.1;
  uint64_t data_seed = 1234;
  // model / train / infer / baseline
  ModelConfig model = ModelConfig::desk_preset();
  TrainConfig train;
  InferOptions infer;
  BaselineParams baseline;

  // Applies the master data seed to the sections that did not pin their
  // own seed, so one --seed flag reshuffles the whole dataset.
  void derive_seeds();

  PhonemeInventory make_inventory() const;
  EntityDb make_entities(const PhonemeInventory& inv) const;
  std::vector<QueryPattern> make_patterns(const PhonemeInventory& inv) const;
  DatasetParams dataset_params(int jobs) const;
};

// path may be empty: returns the documented defaults.
CliConfig load_cli_config(const std::filesystem::path& path);
CliConfig parse_cli_config(const std::string& json_text,
                           const std::filesystem::path& base_dir);

}  // namespace s2s
