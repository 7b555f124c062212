// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace s2s {

Tensor& ParamStore::define(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw RuntimeError("parameter already defined: " + name);
  for (int d : shape) {
    if (d <= 0) throw RuntimeError("non-positive dimension in parameter " + name);
  }
  index_[name] = entries_.size();
  order_.push_back(name);
  ParamEntry e;
  e.name = name;
  e.tensor = Tensor(std::move(shape));
  entries_.push_back(std::move(e));
  return entries_.back().tensor;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) > 0; }

ParamEntry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw RuntimeError("unknown parameter: " + name);
  return entries_[it->second];
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw RuntimeError("unknown parameter: " + name);
  return entries_[it->second];
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

size_t ParamStore::total_elements() const {
  size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.data.size();
  return n;
}

void ParamStore::set_trainable_prefix(const std::string& prefix, bool trainable) {
  for (auto& e : entries_) {
    if (e.name.rfind(prefix, 0) == 0) e.trainable = trainable;
  }
}

void adam_step(ParamStore& params, const AdamConfig& cfg, int64_t t) {
  if (t < 1) throw RuntimeError("adam step index must be >= 1");
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    ParamEntry& e = params.at(i);
    if (!e.trainable) continue;
    Tensor& p = e.tensor;
    if (p.grad.size() != p.data.size()) {
      throw RuntimeError("missing gradient for parameter '" + e.name + "'");
    }
    if (e.adam_m.size() != p.data.size()) {
      e.adam_m.assign(p.data.size(), 0.0);
      e.adam_v.assign(p.data.size(), 0.0);
    }
    for (size_t j = 0; j < p.data.size(); ++j) {
      double g = p.grad[j];
      e.adam_m[j] = cfg.beta1 * e.adam_m[j] + (1.0 - cfg.beta1) * g;
      e.adam_v[j] = cfg.beta2 * e.adam_v[j] + (1.0 - cfg.beta2) * g * g;
      double m_hat = e.adam_m[j] / bc1;
      double v_hat = e.adam_v[j] / bc2;
      p.data[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void init_glorot_uniform(Tensor& t, std::mt19937_64& rng) {
  int fan_in = t.rows();
  int fan_out = t.cols();
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data) v = dist(rng);
}

void init_normal(Tensor& t, std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data) v = dist(rng);
}

void init_constant(Tensor& t, double v) { std::fill(t.data.begin(), t.data.end(), v); }

namespace {

constexpr char kMagic[4] = {'S', '2', 'S', 'M'};
constexpr uint8_t kVersion = 0x01;

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& metadata) {
  nlohmann::json meta = metadata;
  nlohmann::json plist = nlohmann::json::array();
  for (size_t i = 0; i < params.size(); ++i) {
    const ParamEntry& e = params.at(i);
    plist.push_back({{"name", e.name}, {"shape", e.tensor.shape}});
  }
  meta["params"] = std::move(plist);
  std::string meta_str = meta.dump();

  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  append_u32(out, static_cast<uint32_t>(meta_str.size()));
  out += meta_str;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params.at(i).tensor;
    for (double v : t.data) {
      float f = static_cast<float>(v);
      char buf[4];
      std::memcpy(buf, &f, 4);
      out.append(buf, 4);
    }
  }
  write_binary_file(path, out.data(), out.size());
}

namespace {

nlohmann::json parse_checkpoint(const std::filesystem::path& path,
                                std::vector<std::pair<std::string, std::vector<int>>>& shapes,
                                std::vector<std::vector<double>>& blobs) {
  std::vector<uint8_t> raw = read_binary_file(path);
  if (raw.size() < 9 || std::memcmp(raw.data(), kMagic, 4) != 0) {
    throw DataError("bad checkpoint magic: " + path.string());
  }
  if (raw[4] != kVersion) throw DataError("unsupported checkpoint version");
  uint32_t meta_len = read_u32(raw.data() + 5);
  size_t off = 9;
  if (off + meta_len > raw.size()) throw DataError("truncated checkpoint metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(raw.begin() + off, raw.begin() + off + meta_len);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid checkpoint metadata: ") + e.what());
  }
  off += meta_len;
  if (!meta.contains("params") || !meta["params"].is_array()) {
    throw DataError("checkpoint metadata missing params list");
  }
  for (const auto& p : meta["params"]) {
    std::string name = p.at("name").get<std::string>();
    std::vector<int> shape = p.at("shape").get<std::vector<int>>();
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw DataError("invalid shape in checkpoint for " + name);
      n *= static_cast<size_t>(d);
    }
    if (off + 4 * n > raw.size()) throw DataError("unexpected end of file in checkpoint blob");
    std::vector<double> data(n);
    for (size_t j = 0; j < n; ++j) {
      float f;
      std::memcpy(&f, raw.data() + off + 4 * j, 4);
      data[j] = static_cast<double>(f);
    }
    off += 4 * n;
    shapes.emplace_back(std::move(name), std::move(shape));
    blobs.push_back(std::move(data));
  }
  if (off != raw.size()) throw DataError("trailing bytes in checkpoint");
  return meta;
}

}  // namespace

nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore& params) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  std::vector<std::vector<double>> blobs;
  nlohmann::json meta = parse_checkpoint(path, shapes, blobs);
  for (size_t i = 0; i < shapes.size(); ++i) {
    Tensor& t = params.define(shapes[i].first, shapes[i].second);
    t.data = std::move(blobs[i]);
  }
  return meta;
}

nlohmann::json load_checkpoint_into(const std::filesystem::path& path, ParamStore& params) {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  std::vector<std::vector<double>> blobs;
  nlohmann::json meta = parse_checkpoint(path, shapes, blobs);
  for (size_t i = 0; i < shapes.size(); ++i) {
    const std::string& name = shapes[i].first;
    if (!params.contains(name)) {
      throw DataError("checkpoint parameter not present in model: " + name);
    }
    Tensor& t = params.tensor(name);
    if (t.shape != shapes[i].second) {
      throw DataError("shape mismatch loading parameter " + name);
    }
    t.data = std::move(blobs[i]);
  }
  return meta;
}

}  // namespace s2s
