// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "phoneme.hpp"

namespace s2s {

// Prefix tree over entity phoneme sequences. Edges never carry PAD or
// BLANK; several entities may terminate on one node.
struct TrieNode {
  std::map<int, std::unique_ptr<TrieNode>> children;
  std::vector<std::string> terminal_entities;
};

struct Trie {
  std::unique_ptr<TrieNode> root;
  size_t node_count = 0;
};

Trie build_trie(const EntityDb& db);

// One run of equal frame labels after greedy decoding, blanks removed.
struct PathSegment {
  int phoneme = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  // Highest-mean-probability phonemes over the segment's frames
  // (alternatives[0] is the greedy label); used as cost-0 substitutions.
  std::vector<int> alternatives;
  std::vector<double> alternative_probs;  // mean probability, parallel
};

struct CollapsedPath {
  std::vector<PathSegment> segments;

  std::vector<int> phonemes() const {
    std::vector<int> out;
    out.reserve(segments.size());
    for (const auto& s : segments) out.push_back(s.phoneme);
    return out;
  }
};

// Greedy per-frame argmax, merged into segments, blanks and padding
// dropped. top_k > 1 records that many per-segment alternatives.
CollapsedPath collapse_path(const Posteriorgram& pg, int top_k = 1);

struct SpanCandidate {
  std::string entity_id;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  int edit_cost = 0;
  int start_segment = 0;
  int end_segment = 0;  // inclusive
};

// Walks the trie over every contiguous segment window and emits one
// candidate per (entity, window) whose edit distance is within budget.
// Segment alternatives match at cost 0; substitutions, insertions and
// deletions cost 1. Candidates are ordered by (cost asc, length desc,
// id asc) and truncated to max_candidates (<= 0 means unlimited).
std::vector<SpanCandidate> detect_spans(const CollapsedPath& path, const Trie& trie,
                                        int edit_budget, int max_candidates);

}  // namespace s2s
