// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace s2s {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == '\t') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<int> parse_tokens(const std::string& field, const PhonemeInventory& inv,
                              int line_no) {
  std::vector<int> out;
  std::istringstream ss(field);
  std::string tok;
  while (ss >> tok) {
    int idx = inv.lookup(tok);
    if (idx < 0) {
      throw DataError("unknown phoneme '" + tok + "' line " + std::to_string(line_no));
    }
    if (idx == PhonemeInventory::kPad) {
      throw DataError("PAD not allowed in pattern, line " + std::to_string(line_no));
    }
    out.push_back(idx);
  }
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

double uniform01(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  return d(rng);
}

}  // namespace

std::vector<QueryPattern> load_patterns(const std::filesystem::path& path,
                                        const PhonemeInventory& inv) {
  std::vector<QueryPattern> patterns;
  std::unordered_set<std::string> ids;
  int line_no = 0;
  for (const auto& line : split_lines(read_text_file(path))) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw DataError("pattern line needs 3 tab-separated fields, line " +
                      std::to_string(line_no));
    }
    QueryPattern p;
    p.id = fields[0];
    if (p.id.empty()) throw DataError("empty pattern id line " + std::to_string(line_no));
    if (!ids.insert(p.id).second) {
      throw DataError("duplicate pattern id '" + p.id + "' line " + std::to_string(line_no));
    }
    p.prefix = parse_tokens(fields[1], inv, line_no);
    p.suffix = parse_tokens(fields[2], inv, line_no);
    patterns.push_back(std::move(p));
  }
  if (patterns.empty()) throw DataError("no patterns in " + path.string());
  return patterns;
}

void save_patterns(const std::filesystem::path& path, const std::vector<QueryPattern>& patterns,
                   const PhonemeInventory& inv) {
  std::string out;
  for (const auto& p : patterns) {
    out += p.id;
    out += '\t';
    for (size_t i = 0; i < p.prefix.size(); ++i) {
      if (i) out += ' ';
      out += inv.symbol(p.prefix[i]);
    }
    out += '\t';
    for (size_t i = 0; i < p.suffix.size(); ++i) {
      if (i) out += ' ';
      out += inv.symbol(p.suffix[i]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void validate_noise_config(const NoiseConfig& cfg) {
  if (cfg.confusion_eps < 0.0 || cfg.confusion_eps >= 1.0) {
    throw ConfigError("confusion_eps must be in [0,1)");
  }
  if (cfg.blank_insert_prob < 0.0 || cfg.blank_insert_prob >= 1.0) {
    throw ConfigError("blank_insert_prob must be in [0,1)");
  }
  if (cfg.dur_min < 1 || cfg.dur_max < cfg.dur_min) {
    throw ConfigError("durations must satisfy 1 <= dur_min <= dur_max");
  }
  if (cfg.confusable_k < 1) throw ConfigError("confusable_k must be >= 1");
}

std::vector<int> confusable_neighbors(int q, int k, int inventory_size) {
  int phones = inventory_size - 2;
  if (phones < 2) throw ConfigError("inventory too small for confusions");
  k = std::min(k, phones - 1);
  std::vector<int> out;
  out.reserve(k);
  for (int step = 1; static_cast<int>(out.size()) < k; ++step) {
    int up = 2 + ((q - 2 + step) % phones);
    if (static_cast<int>(out.size()) < k && up != q) out.push_back(up);
    int down = 2 + ((q - 2 - step) % phones + phones) % phones;
    if (static_cast<int>(out.size()) < k && down != q && down != up) out.push_back(down);
  }
  return out;
}

RenderedQuery render_query(const QueryPattern& pattern, const Entity& entity,
                           int max_phonemes) {
  RenderedQuery q;
  size_t total = pattern.prefix.size() + entity.phonemes.size() + pattern.suffix.size();
  if (max_phonemes > 0 && total > static_cast<size_t>(max_phonemes)) {
    throw DataError("query for entity '" + entity.id + "' exceeds max length " +
                    std::to_string(max_phonemes));
  }
  q.phonemes = pattern.prefix;
  q.slot_start = static_cast<int>(q.phonemes.size());
  q.phonemes.insert(q.phonemes.end(), entity.phonemes.begin(), entity.phonemes.end());
  q.slot_end = static_cast<int>(q.phonemes.size()) - 1;
  q.phonemes.insert(q.phonemes.end(), pattern.suffix.begin(), pattern.suffix.end());
  return q;
}

namespace {

// Frame distribution for one emitted label. When the label was swapped,
// the true phoneme keeps the dominant share of the confusion mass.
void fill_confusion_row(double* row, int phones_total, int true_ph, int emitted,
                        const NoiseConfig& cfg) {
  std::fill(row, row + phones_total, 0.0);
  double eps = cfg.confusion_eps;
  row[emitted] = 1.0 - eps;
  if (eps <= 0.0) {
    row[emitted] = 1.0;
    return;
  }
  auto neighbors = confusable_neighbors(true_ph, cfg.confusable_k, phones_total);
  if (emitted == true_ph) {
    for (int n : neighbors) row[n] += eps / neighbors.size();
  } else {
    // The true phoneme keeps the dominant share so it stays a clear
    // runner-up in the frame distribution.
    constexpr double kTrueShare = 0.6;
    std::vector<int> others;
    for (int n : neighbors) {
      if (n != emitted) others.push_back(n);
    }
    if (others.empty()) {
      row[true_ph] += eps;
    } else {
      row[true_ph] += eps * kTrueShare;
      double rest = eps * (1.0 - kTrueShare);
      for (int n : others) row[n] += rest / others.size();
    }
  }
  double sum = 0.0;
  for (int p = 0; p < phones_total; ++p) sum += row[p];
  for (int p = 0; p < phones_total; ++p) row[p] /= sum;
}

void fill_blank_row(double* row, int phones_total, const NoiseConfig& cfg) {
  std::fill(row, row + phones_total, 0.0);
  double eps = cfg.confusion_eps;
  row[PhonemeInventory::kBlank] = 1.0 - eps;
  if (eps > 0.0) {
    int phones = phones_total - 2;
    for (int p = 2; p < phones_total; ++p) row[p] = eps / phones;
    double sum = 0.0;
    for (int p = 0; p < phones_total; ++p) sum += row[p];
    for (int p = 0; p < phones_total; ++p) row[p] /= sum;
  } else {
    row[PhonemeInventory::kBlank] = 1.0;
  }
}

}  // namespace

SynthResult synthesize_posteriorgram(const std::vector<int>& query, int slot_start,
                                     int slot_end, const NoiseConfig& cfg,
                                     const PhonemeInventory& inv, std::mt19937_64& rng,
                                     int max_frames) {
  validate_noise_config(cfg);
  if (query.empty()) throw DataError("cannot synthesize an empty query");
  if (slot_start < 0 || slot_end < slot_start || slot_end >= static_cast<int>(query.size())) {
    throw DataError("slot span out of range");
  }
  const int n = static_cast<int>(query.size());
  const int P = inv.size();

  std::vector<int> durations(n);
  std::vector<int> emitted(n);
  for (int i = 0; i < n; ++i) {
    int q = query[i];
    if (q < 2 || q >= P) throw DataError("query phoneme index out of range");
    durations[i] = uniform_int(rng, cfg.dur_min, cfg.dur_max);
    emitted[i] = q;
    if (cfg.confusion_eps > 0.0 && uniform01(rng) < cfg.confusion_eps) {
      auto neighbors = confusable_neighbors(q, cfg.confusable_k, P);
      emitted[i] = neighbors[uniform_int(rng, 0, static_cast<int>(neighbors.size()) - 1)];
    }
  }
  // A blank must separate equal adjacent emitted labels or greedy
  // collapse would merge them into one segment.
  std::vector<bool> blank_after(n, false);
  for (int i = 0; i + 1 < n; ++i) {
    bool forced = emitted[i] == emitted[i + 1];
    bool drawn = uniform01(rng) < cfg.blank_insert_prob;
    blank_after[i] = forced || drawn;
  }

  int total = 0;
  for (int i = 0; i < n; ++i) total += durations[i];
  for (int i = 0; i + 1 < n; ++i) total += blank_after[i] ? 1 : 0;
  if (max_frames > 0 && total > max_frames) {
    throw DataError("synthesized posteriorgram would have " + std::to_string(total) +
                    " frames, limit " + std::to_string(max_frames));
  }

  SynthResult res;
  res.pg.frames = total;
  res.pg.phones = P;
  res.pg.rows.assign(static_cast<size_t>(total) * P, 0.0);
  res.emitted_labels = emitted;

  int t = 0;
  std::vector<int> first_frame(n), last_frame(n);
  for (int i = 0; i < n; ++i) {
    first_frame[i] = t;
    for (int d = 0; d < durations[i]; ++d) {
      fill_confusion_row(&res.pg.rows[static_cast<size_t>(t) * P], P, query[i], emitted[i], cfg);
      ++t;
    }
    last_frame[i] = t - 1;
    if (i + 1 < n && blank_after[i]) {
      fill_blank_row(&res.pg.rows[static_cast<size_t>(t) * P], P, cfg);
      ++t;
    }
  }
  res.slot_start_frame = first_frame[slot_start];
  res.slot_end_frame = last_frame[slot_end];
  return res;
}

int Manifest::count(bool train_split) const {
  int n = 0;
  for (const auto& s : samples) n += s.train_split == train_split ? 1 : 0;
  return n;
}

int Manifest::count_test_oov(bool oov) const {
  int n = 0;
  for (const auto& s : samples) {
    if (!s.train_split && s.oov == oov) ++n;
  }
  return n;
}

Manifest load_manifest(const std::filesystem::path& path) {
  Manifest m;
  int line_no = 0;
  for (const auto& line : split_lines(read_text_file(path))) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    Sample s;
    try {
      s.id = j.at("id").get<std::string>();
      s.posterior_path = j.at("posterior").get<std::string>();
      s.slot_id = j.at("slot_id").get<std::string>();
      s.pattern_id = j.at("pattern_id").get<std::string>();
      std::string split = j.at("split").get<std::string>();
      if (split != "train" && split != "test") {
        throw DataError("manifest line " + std::to_string(line_no) + ": bad split '" + split + "'");
      }
      s.train_split = split == "train";
      s.oov = j.at("oov").get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    m.samples.push_back(std::move(s));
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::string out;
  for (const auto& s : manifest.samples) {
    nlohmann::json j{{"id", s.id},
                     {"posterior", s.posterior_path},
                     {"slot_id", s.slot_id},
                     {"pattern_id", s.pattern_id},
                     {"split", s.train_split ? "train" : "test"},
                     {"oov", s.oov}};
    out += j.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

EntityDb synthesize_entities(const PhonemeInventory& inv, const EntitySynthesisConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("entity count must be positive");
  if (cfg.morpheme_count < 2) throw ConfigError("need at least two morphemes");
  if (cfg.morpheme_len_min < 1 || cfg.morpheme_len_max < cfg.morpheme_len_min) {
    throw ConfigError("bad morpheme length range");
  }
  if (cfg.morphemes_min < 1 || cfg.morphemes_max < cfg.morphemes_min) {
    throw ConfigError("bad morphemes-per-entity range");
  }
  auto rng = make_rng(cfg.seed, kTagEntities);
  std::vector<std::vector<int>> morphemes;
  morphemes.reserve(cfg.morpheme_count);
  for (int i = 0; i < cfg.morpheme_count; ++i) {
    int len = uniform_int(rng, cfg.morpheme_len_min, cfg.morpheme_len_max);
    std::vector<int> m(len);
    for (int j = 0; j < len; ++j) m[j] = uniform_int(rng, 2, inv.size() - 1);
    morphemes.push_back(std::move(m));
  }

  EntityDb db;
  std::unordered_set<std::string> seen;
  char idbuf[16];
  for (int i = 0; i < cfg.count; ++i) {
    std::vector<int> seq;
    bool ok = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      seq.clear();
      int parts = uniform_int(rng, cfg.morphemes_min, cfg.morphemes_max);
      for (int p = 0; p < parts; ++p) {
        const auto& m = morphemes[uniform_int(rng, 0, cfg.morpheme_count - 1)];
        seq.insert(seq.end(), m.begin(), m.end());
      }
      if (static_cast<int>(seq.size()) > cfg.max_slot_len) continue;
      std::string key(seq.begin(), seq.end());
      if (seen.count(key)) continue;
      seen.insert(key);
      ok = true;
      break;
    }
    if (!ok) {
      throw ConfigError("could not synthesize " + std::to_string(cfg.count) +
                        " distinct entities; enlarge the morpheme pool");
    }
    std::snprintf(idbuf, sizeof(idbuf), "e%05d", i);
    db.add(Entity{idbuf, seq, ""});
  }
  return db;
}

std::vector<QueryPattern> synthesize_patterns(const PhonemeInventory& inv,
                                              const PatternSynthesisConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("pattern count must be positive");
  auto rng = make_rng(cfg.seed, kTagPatterns);
  std::vector<QueryPattern> out;
  char idbuf[16];
  for (int i = 0; i < cfg.count; ++i) {
    QueryPattern p;
    std::snprintf(idbuf, sizeof(idbuf), "q%02d", i);
    p.id = idbuf;
    int prefix_len = 1 + uniform_int(rng, 0, std::max(0, cfg.prefix_max - 1));
    for (int j = 0; j < prefix_len; ++j) p.prefix.push_back(uniform_int(rng, 2, inv.size() - 1));
    // Most carrier phrases are prefix-only; every third also has a tail.
    if (i % 3 == 2 && cfg.suffix_max > 0) {
      int suffix_len = 1 + uniform_int(rng, 0, cfg.suffix_max - 1);
      for (int j = 0; j < suffix_len; ++j) p.suffix.push_back(uniform_int(rng, 2, inv.size() - 1));
    }
    out.push_back(std::move(p));
  }
  return out;
}

Manifest build_dataset(const PhonemeInventory& inv, const EntityDb& db,
                       const std::vector<QueryPattern>& patterns, const DatasetParams& params,
                       const std::filesystem::path& out_dir) {
  if (params.n_train < 1) throw ConfigError("n_train must be >= 1");
  if (params.n_test < 2) throw ConfigError("n_test must be >= 2");
  if (patterns.empty()) throw ConfigError("no query patterns");
  validate_noise_config(params.noise);

  const int n_entities = static_cast<int>(db.size());
  int oov_count = std::max(1, static_cast<int>(std::lround(params.oov_fraction * n_entities)));
  if (oov_count >= n_entities) {
    throw ConfigError("not enough entities to reserve a held-out pool (" +
                      std::to_string(n_entities) + " total, " + std::to_string(oov_count) +
                      " held out)");
  }
  std::vector<int> perm(n_entities);
  for (int i = 0; i < n_entities; ++i) perm[i] = i;
  auto split_rng = make_rng(params.noise.seed, kTagSplit);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  std::vector<int> oov_pool(perm.begin(), perm.begin() + oov_count);
  std::vector<int> train_pool(perm.begin() + oov_count, perm.end());

  const uint64_t seed = params.noise.seed;
  struct Rendered {
    Sample sample;
    Posteriorgram pg;
  };
  auto make_sample = [&](uint64_t tag, int index, const std::vector<int>& entity_choices,
                         const char* prefix, bool train_split, bool oov) {
    auto rng = make_rng(seed, tag, static_cast<uint64_t>(index));
    int pattern_idx = uniform_int(rng, 0, static_cast<int>(patterns.size()) - 1);
    int entity_idx = entity_choices[uniform_int(rng, 0, static_cast<int>(entity_choices.size()) - 1)];
    const Entity& entity = db.at(entity_idx);
    const QueryPattern& pattern = patterns[pattern_idx];
    RenderedQuery q = render_query(pattern, entity, params.max_speech_len);
    SynthResult synth;
    bool ok = false;
    for (int attempt = 0; attempt < 200; ++attempt) {
      try {
        synth = synthesize_posteriorgram(q.phonemes, q.slot_start, q.slot_end, params.noise,
                                         inv, rng, params.max_speech_len);
        ok = true;
        break;
      } catch (const DataError&) {
        // Oversized draw; retry with fresh durations rather than truncate.
      }
    }
    if (!ok) {
      throw ConfigError("query '" + pattern.id + "' + '" + entity.id +
                        "' cannot fit in max_speech_len; shorten the pattern");
    }
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06d", prefix, index);
    Rendered r;
    r.sample.id = idbuf;
    r.sample.posterior_path = std::string("posteriors/") + idbuf + ".s2sp";
    r.sample.slot_id = entity.id;
    r.sample.pattern_id = pattern.id;
    r.sample.train_split = train_split;
    r.sample.oov = oov;
    r.pg = std::move(synth.pg);
    return r;
  };

  std::vector<Rendered> train_samples(params.n_train);
  parallel_for(static_cast<size_t>(params.n_train), params.jobs, [&](size_t i) {
    train_samples[i] = make_sample(kTagTrainSample, static_cast<int>(i), train_pool, "train",
                                   true, false);
  });

  // Non-OOV test golds come from entities actually seen in training.
  std::set<int> used;
  for (const auto& r : train_samples) used.insert(db.position(r.sample.slot_id));
  std::vector<int> train_used(used.begin(), used.end());

  int n_oov = params.n_test / 2;
  std::vector<Rendered> test_samples(params.n_test);
  parallel_for(static_cast<size_t>(params.n_test), params.jobs, [&](size_t j) {
    bool oov = static_cast<int>(j) < n_oov;
    test_samples[j] = make_sample(kTagTestSample, static_cast<int>(j),
                                  oov ? oov_pool : train_used, "test", false, oov);
  });

  std::filesystem::create_directories(out_dir / "posteriors");
  Manifest manifest;
  manifest.samples.reserve(train_samples.size() + test_samples.size());
  for (auto& r : train_samples) manifest.samples.push_back(r.sample);
  for (auto& r : test_samples) manifest.samples.push_back(r.sample);

  std::vector<const Rendered*> all;
  all.reserve(manifest.samples.size());
  for (const auto& r : train_samples) all.push_back(&r);
  for (const auto& r : test_samples) all.push_back(&r);
  parallel_for(all.size(), params.jobs, [&](size_t i) {
    write_posteriorgram(out_dir / all[i]->sample.posterior_path, all[i]->pg);
  });

  save_manifest(out_dir / "manifest.jsonl", manifest);
  save_inventory(out_dir / "inventory.txt", inv);
  save_entity_db(out_dir / "entities.tsv", db, inv);
  save_patterns(out_dir / "patterns.tsv", patterns, inv);

  nlohmann::json meta{{"n_train", params.n_train},
                      {"n_test", params.n_test},
                      {"n_entities", n_entities},
                      {"oov_pool", oov_count},
                      {"seed", seed},
                      {"noise",
                       {{"confusion_eps", params.noise.confusion_eps},
                        {"blank_insert_prob", params.noise.blank_insert_prob},
                        {"dur_min", params.noise.dur_min},
                        {"dur_max", params.noise.dur_max},
                        {"confusable_k", params.noise.confusable_k}}}};
  write_text_file(out_dir / "meta.json", meta.dump(2) + "\n");
  return manifest;
}

}  // namespace s2s
