// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tensor.hpp"

namespace s2s {

struct ParamEntry {
  std::string name;
  Tensor tensor;
  std::vector<double> adam_m;
  std::vector<double> adam_v;
  bool trainable = true;
};

// Named parameters in insertion order. Iteration order is deterministic,
// which the initializer, optimizer, and checkpoint format all rely on.
class ParamStore {
 public:
  explicit ParamStore(uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  uint64_t rng_seed() const { return rng_seed_; }

  Tensor& define(const std::string& name, std::vector<int> shape);
  bool contains(const std::string& name) const;
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  Tensor& tensor(const std::string& name) { return entry(name).tensor; }
  const Tensor& tensor(const std::string& name) const { return entry(name).tensor; }

  size_t size() const { return entries_.size(); }
  ParamEntry& at(size_t i) { return entries_[i]; }
  const ParamEntry& at(size_t i) const { return entries_[i]; }
  const std::vector<std::string>& names() const { return order_; }

  void zero_grads();
  size_t total_elements() const;
  // Marks every parameter whose name starts with `prefix`.
  void set_trainable_prefix(const std::string& prefix, bool trainable);

 private:
  uint64_t rng_seed_;
  std::vector<std::string> order_;
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, size_t> index_;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update with bias correction; t counts from 1. Trainable
// parameters must carry gradients.
void adam_step(ParamStore& params, const AdamConfig& cfg, int64_t t);

// Deterministic initializers.
void init_glorot_uniform(Tensor& t, std::mt19937_64& rng);
void init_normal(Tensor& t, std::mt19937_64& rng, double stddev);
void init_constant(Tensor& t, double v);

// Checkpoint container: magic "S2SM", version 0x01, u32 LE metadata
// length, JSON metadata with an ordered params list of {name, shape},
// then one f32 little-endian row-major blob per parameter.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata);
// Loads params into an empty store (defines entries) and returns metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params);
// Copies checkpoint parameters into matching entries of an existing store;
// every checkpoint parameter must exist with an identical shape.
nlohmann::json load_checkpoint_into(const std::filesystem::path& path, ParamStore& params);

}  // namespace s2s
