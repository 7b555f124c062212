// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "phoneme.hpp"

namespace s2s {

// Carrier phrase around a slot, e.g. "go to <slot>" at phoneme level.
struct QueryPattern {
  std::string id;
  std::vector<int> prefix;
  std::vector<int> suffix;
};

std::vector<QueryPattern> load_patterns(const std::filesystem::path& path,
                                        const PhonemeInventory& inv);
void save_patterns(const std::filesystem::path& path, const std::vector<QueryPattern>& patterns,
                   const PhonemeInventory& inv);

// Synthetic acoustic-model noise. Each rendered phoneme is emitted as a
// run of frames; with probability confusion_eps the emitted label is
// swapped for one of the confusable_k nearest inventory neighbours, and
// every frame row keeps (1 - confusion_eps) mass on the emitted label
// with the rest spread over the true phoneme's neighbourhood (the true
// phoneme keeps the largest share, so it stays the runner-up under
// substitution). A blank frame separates phonemes with probability
// blank_insert_prob, and always when two adjacent emitted labels are
// equal so that greedy collapse recovers the emitted sequence.
struct NoiseConfig {
  double confusion_eps = 0.35;
  double blank_insert_prob = 0.1;
  int dur_min = 1;
  int dur_max = 3;
  int confusable_k = 4;
  uint64_t seed = 1234;
};

void validate_noise_config(const NoiseConfig& cfg);

// The k nearest non-reserved inventory indices of q, cyclic, ordered
// q+1, q-1, q+2, q-2, ...
std::vector<int> confusable_neighbors(int q, int k, int inventory_size);

struct RenderedQuery {
  std::vector<int> phonemes;
  int slot_start = 0;  // phoneme positions of the slot, inclusive
  int slot_end = 0;
};

RenderedQuery render_query(const QueryPattern& pattern, const Entity& entity,
                           int max_phonemes);

struct SynthResult {
  Posteriorgram pg;
  int slot_start_frame = 0;
  int slot_end_frame = 0;  // inclusive
  std::vector<int> emitted_labels;  // per query phoneme, after corruption
};

// Renders a query's posteriorgram. slot_start/slot_end are phoneme
// positions; the returned span is their frame image after duration
// expansion. Throws DataError when the result would exceed max_frames.
SynthResult synthesize_posteriorgram(const std::vector<int>& query, int slot_start,
                                     int slot_end, const NoiseConfig& cfg,
                                     const PhonemeInventory& inv, std::mt19937_64& rng,
                                     int max_frames = 0);

struct Sample {
  std::string id;
  std::string posterior_path;  // relative to the dataset directory
  std::string slot_id;
  std::string pattern_id;
  bool train_split = true;
  bool oov = false;
};

struct Manifest {
  std::vector<Sample> samples;

  int count(bool train_split) const;
  int count_test_oov(bool oov) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Synthesis of the closed-world inputs. Entities are random morpheme
// compositions so that the database contains confusable near-duplicates,
// the way real place names share building blocks.
struct EntitySynthesisConfig {
  int count = 1000;
  int morpheme_count = 96;
  int morpheme_len_min = 1;
  int morpheme_len_max = 3;
  int morphemes_min = 2;
  int morphemes_max = 4;
  int max_slot_len = 10;
  uint64_t seed = 1;
};

EntityDb synthesize_entities(const PhonemeInventory& inv, const EntitySynthesisConfig& cfg);

struct PatternSynthesisConfig {
  int count = 5;
  int prefix_max = 4;
  int suffix_max = 2;
  uint64_t seed = 2;
};

std::vector<QueryPattern> synthesize_patterns(const PhonemeInventory& inv,
                                              const PatternSynthesisConfig& cfg);

struct DatasetParams {
  int n_train = 2000;
  int n_test = 200;
  double oov_fraction = 0.1;
  int max_speech_len = 40;
  NoiseConfig noise;
  int jobs = 0;
};

// Partitions entities into a training-visible pool and a held-out pool,
// renders every sample, writes posteriors plus manifest plus the input
// files into out_dir, and returns the manifest. Fully determined by
// (inventory, db, patterns, params).
Manifest build_dataset(const PhonemeInventory& inv, const EntityDb& db,
                       const std::vector<QueryPattern>& patterns, const DatasetParams& params,
                       const std::filesystem::path& out_dir);

}  // namespace s2s
