// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace s2s {

// Fixed symbol set shared by every component. Index 0 is the padding
// placeholder and index 1 the CTC blank; real phonemes start at 2.
struct PhonemeInventory {
  static constexpr int kPad = 0;
  static constexpr int kBlank = 1;

  std::vector<std::string> symbols;
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(symbols.size()); }
  int phone_count() const { return size() - 2; }
  int lookup(const std::string& sym) const {
    auto it = index.find(sym);
    return it == index.end() ? -1 : it->second;
  }
  const std::string& symbol(int i) const { return symbols.at(i); }

  static PhonemeInventory from_symbols(std::vector<std::string> symbols);
  // "p00".."pNN" plus the two reserved symbols.
  static PhonemeInventory synthetic(int phone_count);
};

PhonemeInventory load_inventory(const std::filesystem::path& path);
void save_inventory(const std::filesystem::path& path, const PhonemeInventory& inv);

struct Entity {
  std::string id;
  std::vector<int> phonemes;  // inventory indices, no PAD/BLANK
  std::string surface;
};

class EntityDb {
 public:
  void add(Entity entity);
  size_t size() const { return entities_.size(); }
  bool empty() const { return entities_.empty(); }
  const Entity& at(size_t i) const { return entities_[i]; }
  const std::vector<Entity>& entities() const { return entities_; }
  bool contains(const std::string& id) const { return by_id_.count(id) > 0; }
  const Entity& by_id(const std::string& id) const;
  int position(const std::string& id) const;

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, size_t> by_id_;
};

EntityDb load_entity_db(const std::filesystem::path& path, const PhonemeInventory& inv,
                        int max_len = 10);
void save_entity_db(const std::filesystem::path& path, const EntityDb& db,
                    const PhonemeInventory& inv);

// T x P matrix of per-frame phoneme distributions, stored row-major.
struct Posteriorgram {
  int frames = 0;
  int phones = 0;  // == inventory size
  std::vector<double> rows;

  double& at(int t, int p) { return rows[static_cast<size_t>(t) * phones + p]; }
  double at(int t, int p) const { return rows[static_cast<size_t>(t) * phones + p]; }
  const double* row(int t) const { return rows.data() + static_cast<size_t>(t) * phones; }
  int argmax_row(int t) const;
};

// Checks row sums (1 within 1e-5), entry range, and frame count bounds.
void validate_posteriorgram(const Posteriorgram& pg, int max_frames = 0);

// File format: magic "S2SP", version 0x01, u32 LE frame count, u32 LE
// phone count, then frames*phones f32 little-endian row-major values.
void write_posteriorgram(const std::filesystem::path& path, const Posteriorgram& pg);
Posteriorgram read_posteriorgram(const std::filesystem::path& path,
                                 const PhonemeInventory& inv);

Posteriorgram one_hot_sequence(const std::vector<int>& phonemes, const PhonemeInventory& inv);

}  // namespace s2s
