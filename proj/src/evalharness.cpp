// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

namespace s2s {

nlohmann::json EvalReport::to_json(bool include_records) const {
  nlohmann::json j{{"accuracy_entire", accuracy_entire()},
                   {"accuracy_non_oov", accuracy_non_oov()},
                   {"accuracy_oov", accuracy_oov()},
                   {"counts",
                    {{"total", total},
                     {"correct", correct},
                     {"total_oov", total_oov},
                     {"correct_oov", correct_oov},
                     {"total_non_oov", total_non_oov},
                     {"correct_non_oov", correct_non_oov}}}};
  if (include_records) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) {
      recs.push_back({{"id", r.id},
                      {"gold", r.gold},
                      {"predicted", r.predicted.empty() ? nlohmann::json(nullptr)
                                                        : nlohmann::json(r.predicted)},
                      {"correct", r.correct},
                      {"oov", r.oov},
                      {"score", r.score},
                      {"span", {r.span_start, r.span_end}}});
    }
    j["records"] = std::move(recs);
  }
  return j;
}

std::string EvalReport::records_csv() const {
  std::ostringstream out;
  out << "id,gold,predicted,correct,oov,score\n";
  for (const auto& r : records) {
    out << r.id << ',' << r.gold << ',' << r.predicted << ',' << (r.correct ? 1 : 0) << ','
        << (r.oov ? 1 : 0) << ',' << r.score << '\n';
  }
  return out.str();
}

namespace {

std::vector<int> test_sample_indices(const Manifest& manifest) {
  std::vector<int> idx;
  for (size_t i = 0; i < manifest.samples.size(); ++i) {
    if (!manifest.samples[i].train_split) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

EvalReport reduce_records(std::vector<EvalRecord> records) {
  EvalReport report;
  report.records = std::move(records);
  for (const auto& r : report.records) {
    ++report.total;
    if (r.oov) {
      ++report.total_oov;
      report.correct_oov += r.correct ? 1 : 0;
    } else {
      ++report.total_non_oov;
      report.correct_non_oov += r.correct ? 1 : 0;
    }
    report.correct += r.correct ? 1 : 0;
  }
  return report;
}

void require_both_classes(const std::vector<int>& idx, const Manifest& manifest) {
  bool has_oov = false, has_non = false;
  for (int i : idx) {
    (manifest.samples[i].oov ? has_oov : has_non) = true;
  }
  if (idx.empty()) throw DataError("manifest has no test samples");
  if (!has_oov || !has_non) {
    throw DataError("test split must contain both seen and unseen gold slots");
  }
}

}  // namespace

EvalReport evaluate(const LoadedDataset& data, const Engine& engine, const InferOptions& opts,
                    int jobs) {
  std::vector<int> idx = test_sample_indices(data.manifest);
  require_both_classes(idx, data.manifest);
  std::vector<EvalRecord> records(idx.size());
  parallel_for(idx.size(), jobs, [&](size_t k) {
    const Sample& s = data.manifest.samples[idx[k]];
    InferenceResult res = engine.infer(data.posteriors[idx[k]], opts);
    EvalRecord r;
    r.id = s.id;
    r.gold = s.slot_id;
    r.oov = s.oov;
    if (res.accepted()) {
      r.predicted = res.best_id;
      r.score = res.score;
      r.span_start = res.span_start;
      r.span_end = res.span_end;
      r.correct = res.best_id == s.slot_id;
    }
    records[k] = std::move(r);
  });
  return reduce_records(std::move(records));
}

namespace {

// Phoneme bigram model with add-alpha smoothing. Symbol ids are shifted
// by one so that 0 is the sentence boundary.
class BigramModel {
 public:
  BigramModel(int vocab, double alpha) : vocab_(vocab + 1), alpha_(alpha) {
    counts_.assign(static_cast<size_t>(vocab_) * vocab_, 0.0);
    row_sums_.assign(vocab_, 0.0);
  }

  void observe(const std::vector<int>& seq) {
    int prev = 0;
    for (int sym : seq) {
      bump(prev, sym + 1);
      prev = sym + 1;
    }
    bump(prev, 0);
  }

  double log_prob(int prev_sym, int sym) const {
    int p = prev_sym < 0 ? 0 : prev_sym + 1;
    int s = sym < 0 ? 0 : sym + 1;
    double num = counts_[static_cast<size_t>(p) * vocab_ + s] + alpha_;
    double den = row_sums_[p] + alpha_ * vocab_;
    return std::log(num / den);
  }

 private:
  void bump(int p, int s) {
    counts_[static_cast<size_t>(p) * vocab_ + s] += 1.0;
    row_sums_[p] += 1.0;
  }
  int vocab_;
  double alpha_;
  std::vector<double> counts_;
  std::vector<double> row_sums_;
};

int levenshtein_distance(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (size_t j = 1; j <= b.size(); ++j) {
      int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Max-score path through the per-segment alternatives.
std::vector<int> viterbi_decode(const CollapsedPath& path, const BigramModel* lm,
                                double lm_weight) {
  const int T = static_cast<int>(path.segments.size());
  if (T == 0) return {};
  std::vector<std::vector<double>> score(T);
  std::vector<std::vector<int>> back(T);
  for (int t = 0; t < T; ++t) {
    const auto& seg = path.segments[t];
    int A = static_cast<int>(seg.alternatives.size());
    score[t].assign(A, -1e300);
    back[t].assign(A, -1);
    for (int a = 0; a < A; ++a) {
      double acoustic = std::log(std::max(seg.alternative_probs[a], 1e-12));
      if (t == 0) {
        double lmterm = lm ? lm_weight * lm->log_prob(-1, seg.alternatives[a]) : 0.0;
        score[t][a] = acoustic + lmterm;
        continue;
      }
      const auto& prev_seg = path.segments[t - 1];
      for (int b = 0; b < static_cast<int>(prev_seg.alternatives.size()); ++b) {
        double lmterm =
            lm ? lm_weight * lm->log_prob(prev_seg.alternatives[b], seg.alternatives[a]) : 0.0;
        double cand = score[t - 1][b] + acoustic + lmterm;
        if (cand > score[t][a]) {
          score[t][a] = cand;
          back[t][a] = b;
        }
      }
    }
  }
  // Close with the boundary transition.
  int best = 0;
  double best_score = -1e300;
  for (int a = 0; a < static_cast<int>(score[T - 1].size()); ++a) {
    double s = score[T - 1][a] +
               (lm ? lm_weight * lm->log_prob(path.segments[T - 1].alternatives[a], -1) : 0.0);
    if (s > best_score) {
      best_score = s;
      best = a;
    }
  }
  std::vector<int> out(T);
  int a = best;
  for (int t = T - 1; t >= 0; --t) {
    out[t] = path.segments[t].alternatives[a];
    a = back[t][a];
  }
  return out;
}

bool starts_with(const std::vector<int>& seq, const std::vector<int>& prefix) {
  if (prefix.size() > seq.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), seq.begin());
}

bool ends_with(const std::vector<int>& seq, const std::vector<int>& suffix) {
  if (suffix.size() > seq.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), seq.rbegin());
}

// Strips the longest exactly-matching carrier prefix/suffix pair.
std::vector<int> strip_patterns(const std::vector<int>& decoded,
                                const std::vector<QueryPattern>& patterns) {
  size_t best_strip = 0;
  const QueryPattern* best = nullptr;
  for (const auto& p : patterns) {
    size_t strip = p.prefix.size() + p.suffix.size();
    if (strip <= best_strip) continue;
    if (decoded.size() <= strip) continue;  // the hypothesis must stay non-empty
    if (starts_with(decoded, p.prefix) && ends_with(decoded, p.suffix)) {
      best_strip = strip;
      best = &p;
    }
  }
  if (!best) return decoded;
  return std::vector<int>(decoded.begin() + best->prefix.size(),
                          decoded.end() - best->suffix.size());
}

}  // namespace

EvalReport pipeline_baseline(const LoadedDataset& data, const BaselineParams& params,
                             int jobs) {
  if (params.top_k < 1) throw ConfigError("baseline top_k must be >= 1");
  std::vector<int> idx = test_sample_indices(data.manifest);
  require_both_classes(idx, data.manifest);

  // A generation-style decoder leans on sequence statistics from the
  // training transcripts; lm_weight 0 removes that component.
  std::unique_ptr<BigramModel> lm;
  if (params.lm_weight > 0.0) {
    lm = std::make_unique<BigramModel>(data.inv.size(), params.alpha);
    for (size_t i = 0; i < data.manifest.samples.size(); ++i) {
      const Sample& s = data.manifest.samples[i];
      if (!s.train_split) continue;
      RenderedQuery q = render_query(data.pattern_by_id(s.pattern_id), data.db.by_id(s.slot_id), 0);
      lm->observe(q.phonemes);
    }
  }

  std::vector<EvalRecord> records(idx.size());
  parallel_for(idx.size(), jobs, [&](size_t k) {
    const Sample& s = data.manifest.samples[idx[k]];
    CollapsedPath path = collapse_path(data.posteriors[idx[k]], params.top_k);
    std::vector<int> decoded = viterbi_decode(path, lm.get(), params.lm_weight);
    std::vector<int> hypothesis = strip_patterns(decoded, data.patterns);

    EvalRecord r;
    r.id = s.id;
    r.gold = s.slot_id;
    r.oov = s.oov;
    if (!hypothesis.empty()) {
      int best_dist = std::numeric_limits<int>::max();
      const Entity* best = nullptr;
      for (const auto& e : data.db.entities()) {
        int d = levenshtein_distance(hypothesis, e.phonemes);
        if (d < best_dist || (d == best_dist && best && e.id < best->id)) {
          best_dist = d;
          best = &e;
        }
      }
      if (best) {
        r.predicted = best->id;
        r.score = -best_dist;
        r.correct = best->id == s.slot_id;
      }
    }
    records[k] = std::move(r);
  });
  return reduce_records(std::move(records));
}

}  // namespace s2s
