// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "trie.hpp"

#include <algorithm>
#include <deque>
#include <tuple>
#include <unordered_map>

namespace s2s {

Trie build_trie(const EntityDb& db) {
  if (db.empty()) throw DataError("cannot build trie from empty entity database");
  Trie trie;
  trie.root = std::make_unique<TrieNode>();
  trie.node_count = 1;
  for (const auto& e : db.entities()) {
    TrieNode* node = trie.root.get();
    for (int p : e.phonemes) {
      if (p == PhonemeInventory::kPad || p == PhonemeInventory::kBlank) {
        throw DataError("entity '" + e.id + "' contains a reserved symbol");
      }
      auto it = node->children.find(p);
      if (it == node->children.end()) {
        it = node->children.emplace(p, std::make_unique<TrieNode>()).first;
        ++trie.node_count;
      }
      node = it->second.get();
    }
    node->terminal_entities.push_back(e.id);
  }
  return trie;
}

CollapsedPath collapse_path(const Posteriorgram& pg, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  CollapsedPath path;
  int t = 0;
  while (t < pg.frames) {
    int label = pg.argmax_row(t);
    int start = t;
    while (t < pg.frames && pg.argmax_row(t) == label) ++t;
    if (label == PhonemeInventory::kPad || label == PhonemeInventory::kBlank) continue;
    PathSegment seg;
    seg.phoneme = label;
    seg.start_frame = start;
    seg.end_frame = t - 1;
    double label_mean = 0.0;
    for (int f = start; f < t; ++f) label_mean += pg.at(f, label);
    seg.alternatives.push_back(label);
    seg.alternative_probs.push_back(label_mean / (t - start));
    if (top_k > 1) {
      // Rank the remaining phonemes by mean probability over the segment.
      std::vector<std::pair<double, int>> ranked;
      ranked.reserve(pg.phones - 2);
      for (int p = 2; p < pg.phones; ++p) {
        if (p == label) continue;
        double mean = 0.0;
        for (int f = start; f < t; ++f) mean += pg.at(f, p);
        ranked.emplace_back(mean / (t - start), p);
      }
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (int i = 0; i < top_k - 1 && i < static_cast<int>(ranked.size()); ++i) {
        seg.alternatives.push_back(ranked[i].second);
        seg.alternative_probs.push_back(ranked[i].first);
      }
    }
    path.segments.push_back(std::move(seg));
  }
  return path;
}

namespace {

struct StateKey {
  const TrieNode* node;
  int pos;
  bool operator==(const StateKey& o) const { return node == o.node && pos == o.pos; }
};

struct StateKeyHash {
  size_t operator()(const StateKey& k) const {
    return std::hash<const void*>()(k.node) * 1000003u + static_cast<size_t>(k.pos);
  }
};

struct PendingCandidate {
  std::string entity_id;
  int start_segment;
  int end_segment;
  int cost;
};

}  // namespace

std::vector<SpanCandidate> detect_spans(const CollapsedPath& path, const Trie& trie,
                                        int edit_budget, int max_candidates) {
  if (edit_budget < 0) throw ConfigError("edit budget must be >= 0");
  const int n = static_cast<int>(path.segments.size());
  // Min edit cost per (entity, start, end) window.
  std::unordered_map<std::string, size_t> best;
  std::vector<PendingCandidate> found;
  auto record = [&](const TrieNode* node, int start, int end_exclusive, int cost) {
    if (end_exclusive <= start) return;  // windows are non-empty
    for (const auto& id : node->terminal_entities) {
      std::string key = id + "\t" + std::to_string(start) + "\t" + std::to_string(end_exclusive);
      auto it = best.find(key);
      if (it == best.end()) {
        best.emplace(std::move(key), found.size());
        found.push_back({id, start, end_exclusive - 1, cost});
      } else if (cost < found[it->second].cost) {
        found[it->second].cost = cost;
      }
    }
  };

  // 0-1 BFS from each start segment over (trie node, next segment) states.
  std::deque<std::tuple<const TrieNode*, int, int>> queue;
  std::unordered_map<StateKey, int, StateKeyHash> dist;
  for (int start = 0; start < n; ++start) {
    queue.clear();
    dist.clear();
    queue.emplace_back(trie.root.get(), start, 0);
    dist[{trie.root.get(), start}] = 0;
    while (!queue.empty()) {
      auto [node, pos, cost] = queue.front();
      queue.pop_front();
      auto settled = dist.find({node, pos});
      if (settled == dist.end() || settled->second < cost) continue;
      record(node, start, pos, cost);

      auto relax = [&](const TrieNode* nnode, int npos, int ncost) {
        if (ncost > edit_budget) return;
        StateKey key{nnode, npos};
        auto it = dist.find(key);
        if (it != dist.end() && it->second <= ncost) return;
        dist[key] = ncost;
        if (ncost == cost) {
          queue.emplace_front(nnode, npos, ncost);
        } else {
          queue.emplace_back(nnode, npos, ncost);
        }
      };

      if (pos < n) {
        const PathSegment& seg = path.segments[pos];
        for (const auto& [sym, child] : node->children) {
          bool matches = std::find(seg.alternatives.begin(), seg.alternatives.end(), sym) !=
                         seg.alternatives.end();
          relax(child.get(), pos + 1, matches ? cost : cost + 1);
        }
        // Extra segment not present in the entity.
        relax(node, pos + 1, cost + 1);
      }
      // Entity symbol with no matching segment.
      for (const auto& [sym, child] : node->children) {
        relax(child.get(), pos, cost + 1);
      }
    }
  }

  std::vector<SpanCandidate> out;
  out.reserve(found.size());
  for (const auto& f : found) {
    SpanCandidate c;
    c.entity_id = f.entity_id;
    c.start_segment = f.start_segment;
    c.end_segment = f.end_segment;
    c.start_frame = path.segments[f.start_segment].start_frame;
    c.end_frame = path.segments[f.end_segment].end_frame;
    c.edit_cost = f.cost;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const SpanCandidate& a, const SpanCandidate& b) {
    if (a.edit_cost != b.edit_cost) return a.edit_cost < b.edit_cost;
    int la = a.end_frame - a.start_frame, lb = b.end_frame - b.start_frame;
    if (la != lb) return la > lb;
    if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
    return a.start_frame < b.start_frame;
  });
  if (max_candidates > 0 && static_cast<int>(out.size()) > max_candidates) {
    out.resize(max_candidates);
  }
  return out;
}

}  // namespace s2s
