// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "infer.hpp"
#include "train.hpp"

namespace s2s {

struct EvalRecord {
  std::string id;
  std::string gold;
  std::string predicted;  // empty = no slot accepted
  bool correct = false;
  bool oov = false;
  double score = 0.0;
  int span_start = -1;
  int span_end = -1;
};

// Accuracy split by whether the gold slot was seen in training data.
// Accuracies are exact counts divided once.
struct EvalReport {
  int total = 0, total_oov = 0, total_non_oov = 0;
  int correct = 0, correct_oov = 0, correct_non_oov = 0;
  std::vector<EvalRecord> records;

  double accuracy_entire() const { return total ? static_cast<double>(correct) / total : 0.0; }
  double accuracy_oov() const {
    return total_oov ? static_cast<double>(correct_oov) / total_oov : 0.0;
  }
  double accuracy_non_oov() const {
    return total_non_oov ? static_cast<double>(correct_non_oov) / total_non_oov : 0.0;
  }
  nlohmann::json to_json(bool include_records = true) const;
  std::string records_csv() const;
};

// Runs the matcher over the manifest's test split. A prediction is
// correct iff the predicted entity id equals the gold id; a rejected
// utterance counts as incorrect.
EvalReport evaluate(const LoadedDataset& data, const Engine& engine, const InferOptions& opts,
                    int jobs = 0);

// Pipeline decode-then-look-up baseline: segment-level Viterbi decoding
// of the posteriorgram (acoustic score plus an optional phoneme bigram
// model fitted on the training transcripts), longest matching carrier
// prefix/suffix stripped, then nearest entity by edit distance. With
// lm_weight == 0 this reduces to greedy collapse + lookup.
struct BaselineParams {
  double lm_weight = 1.0;
  double alpha = 0.1;  // add-alpha smoothing of the bigram counts
  int top_k = 2;       // per-segment alternatives available to the decoder
};

EvalReport pipeline_baseline(const LoadedDataset& data, const BaselineParams& params,
                             int jobs = 0);

}  // namespace s2s
