// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace s2s {

// Error taxonomy mirrored by the C API status codes and CLI exit codes:
// config = 2, data = 3, runtime = 4.
class Error : public std::runtime_error {
 public:
  enum class Kind { Config = 2, Data = 3, Runtime = 4 };
  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::Data, what) {}
};

class RuntimeError : public Error {
 public:
  explicit RuntimeError(const std::string& what) : Error(Kind::Runtime, what) {}
};

// splitmix64; used to derive independent per-item RNG streams from
// (seed, tag, index) so parallel and serial generation agree bit-for-bit.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t tag, uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ (tag * 0x9e3779b97f4a7c15ULL)) + index);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t tag, uint64_t index = 0) {
  return std::mt19937_64(mix_seed(seed, tag, index));
}

// Stream tags for derived RNGs.
enum : uint64_t {
  kTagInventory = 1,
  kTagEntities = 2,
  kTagPatterns = 3,
  kTagTrainSample = 4,
  kTagTestSample = 5,
  kTagSplit = 6,
  kTagInit = 7,
  kTagTrain = 8,
  kTagGradCheck = 9,
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must not
// depend on scheduling; callers write to disjoint slots.
inline void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::vector<uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const void* data, size_t size);

}  // namespace s2s
