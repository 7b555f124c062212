// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "evalharness.hpp"
#include "infer.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace s2s;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_cfg(int vocab) {
  ModelConfig cfg = ModelConfig::desk_preset();
  cfg.hidden = 16;
  cfg.intermediate = 24;
  cfg.heads = 2;
  cfg.layers_speech = 1;
  cfg.layers_knowledge = 1;
  cfg.layers_bridge = 1;
  cfg.dropout = 0.0;
  cfg.vocab = vocab;
  return cfg;
}

Engine make_engine(const PhonemeInventory& inv, const EntityDb& db, uint64_t seed,
                   double theta = -1e30) {
  ModelConfig cfg = tiny_cfg(inv.size());
  ParamStore ps(seed);
  define_model_params(ps, cfg);
  return Engine::from_parts(inv, db, std::move(ps), cfg, theta);
}

EntityDb shuffled_copy(const EntityDb& db, uint64_t seed) {
  std::vector<Entity> entities = db.entities();
  std::mt19937_64 rng(seed);
  std::shuffle(entities.begin(), entities.end(), rng);
  EntityDb out;
  for (auto& e : entities) out.add(std::move(e));
  return out;
}

}  // namespace

TEST_CASE("pure-blank input yields no candidates and no slot") {
  PhonemeInventory inv = PhonemeInventory::synthetic(8);
  EntityDb db;
  db.add(Entity{"e0", {2, 3}, ""});
  db.add(Entity{"e1", {4, 5}, ""});
  Engine engine = make_engine(inv, db, 21);
  Posteriorgram blanks = one_hot_sequence(
      std::vector<int>(5, PhonemeInventory::kBlank), inv);
  InferenceResult res = engine.infer(blanks);
  CHECK_FALSE(res.accepted());
  CHECK(res.candidates.empty());
}

TEST_CASE("an infinite threshold always rejects") {
  PhonemeInventory inv = PhonemeInventory::synthetic(8);
  EntityDb db;
  db.add(Entity{"e0", {2, 3}, ""});
  db.add(Entity{"e1", {2, 4}, ""});
  Engine engine = make_engine(inv, db, 22);
  Posteriorgram pg = one_hot_sequence({2, 3}, inv);
  InferOptions opts;
  opts.threshold = std::numeric_limits<double>::infinity();
  InferenceResult res = engine.infer(pg, opts);
  CHECK_FALSE(res.accepted());
  CHECK_FALSE(res.candidates.empty());  // detection still reports candidates
}

TEST_CASE("inference result is invariant to entity db order") {
  PhonemeInventory inv = PhonemeInventory::synthetic(16);
  EntitySynthesisConfig ecfg;
  ecfg.count = 25;
  ecfg.morpheme_count = 18;
  ecfg.max_slot_len = 5;
  ecfg.seed = 5;
  EntityDb db = synthesize_entities(inv, ecfg);
  EntityDb shuffled = shuffled_copy(db, 77);
  Engine a = make_engine(inv, db, 23);
  Engine b = make_engine(inv, shuffled, 23);

  auto rng = make_rng(1, 9);
  NoiseConfig noise;
  noise.confusion_eps = 0.25;
  noise.confusable_k = 3;
  for (int trial = 0; trial < 5; ++trial) {
    const Entity& gold = db.at(trial * 3);
    std::vector<int> query = {2, 3};
    query.insert(query.end(), gold.phonemes.begin(), gold.phonemes.end());
    SynthResult r = synthesize_posteriorgram(
        query, 2, static_cast<int>(query.size()) - 1, noise, inv, rng, 0);
    InferenceResult ra = a.infer(r.pg);
    InferenceResult rb = b.infer(r.pg);
    CHECK(ra.best_id == rb.best_id);
    CHECK(ra.score == rb.score);
    REQUIRE(ra.candidates.size() == rb.candidates.size());
    for (size_t i = 0; i < ra.candidates.size(); ++i) {
      CHECK(ra.candidates[i].entity_id == rb.candidates[i].entity_id);
      CHECK(ra.candidates[i].score == rb.candidates[i].score);
    }
  }
}

TEST_CASE("best is the argmax of the reported candidate scores") {
  PhonemeInventory inv = PhonemeInventory::synthetic(12);
  EntityDb db;
  db.add(Entity{"e0", {2, 3, 4}, ""});
  db.add(Entity{"e1", {2, 3}, ""});
  db.add(Entity{"e2", {3, 4}, ""});
  Engine engine = make_engine(inv, db, 29);
  Posteriorgram pg = one_hot_sequence({2, 3, 4}, inv);
  InferenceResult res = engine.infer(pg);
  REQUIRE(res.accepted());
  double best = -1e300;
  for (const auto& c : res.candidates) best = std::max(best, c.score);
  CHECK(res.score == best);
}

TEST_CASE("an entity added after training is scoreable and selectable") {
  // No vocabulary gate anywhere on the candidate path: a fresh entity in
  // the db is matched like any other.
  PhonemeInventory inv = PhonemeInventory::synthetic(14);
  EntityDb db;
  db.add(Entity{"seen", {2, 3, 4}, ""});
  EntityDb extended = db;
  extended.add(Entity{"fresh", {9, 10, 11}, ""});
  Engine engine = make_engine(inv, extended, 31);
  Posteriorgram pg = one_hot_sequence({9, 10, 11}, inv);
  InferenceResult res = engine.infer(pg);
  REQUIRE(res.accepted());
  CHECK(res.best_id == "fresh");
  CHECK(std::isfinite(res.score));
}

TEST_CASE("noiseless single-candidate utterances evaluate to perfect accuracy") {
  // Equal-length entities over symbols the carrier phrases never use:
  // with zero noise and budget 0 the only possible candidate window is
  // the gold span itself, so evaluation is exact regardless of the
  // (random) model parameters.
  PhonemeInventory inv = PhonemeInventory::synthetic(24);
  EntityDb db;
  {
    std::mt19937_64 rng(7);
    std::set<std::vector<int>> seen;
    while (db.size() < 40) {
      std::vector<int> seq;
      for (int i = 0; i < 4; ++i) seq.push_back(2 + static_cast<int>(rng() % 16));
      if (!seen.insert(seq).second) continue;
      db.add(Entity{"e" + std::to_string(db.size()), seq, ""});
    }
  }
  std::vector<QueryPattern> patterns = {{"q0", {18, 19}, {}}, {"q1", {20}, {21}}};
  DatasetParams params;
  params.n_train = 10;
  params.n_test = 8;
  params.oov_fraction = 0.2;
  params.noise.confusion_eps = 0.0;
  params.noise.blank_insert_prob = 0.0;
  params.noise.dur_min = params.noise.dur_max = 1;
  params.noise.seed = 404;
  fs::path dir = testutil::temp_dir("eval_ds");
  build_dataset(inv, db, patterns, params, dir);
  LoadedDataset data = load_dataset(dir);

  Engine engine = make_engine(inv, db, 33);
  InferOptions opts;
  opts.threshold = -std::numeric_limits<double>::infinity();
  opts.edit_budget = 0;
  opts.top_k = 1;
  EvalReport report = evaluate(data, engine, opts, 2);
  CHECK(report.accuracy_entire() == 1.0);
  CHECK(report.accuracy_oov() == 1.0);
  CHECK(report.accuracy_non_oov() == 1.0);
  CHECK(report.total == 8);
  CHECK(static_cast<int>(report.records.size()) == report.total);

  // All-reject sanity: +inf threshold zeroes every split.
  InferOptions reject = opts;
  reject.threshold = std::numeric_limits<double>::infinity();
  EvalReport none = evaluate(data, engine, reject, 2);
  CHECK(none.accuracy_entire() == 0.0);
  CHECK(none.accuracy_oov() == 0.0);
  CHECK(none.accuracy_non_oov() == 0.0);
}

TEST_CASE("report accuracies are the exact count ratios") {
  EvalReport r;
  r.total = 200;
  r.total_oov = 100;
  r.total_non_oov = 100;
  r.correct_oov = 80;
  r.correct_non_oov = 90;
  r.correct = 170;
  CHECK(r.accuracy_entire() == doctest::Approx(0.85));
  CHECK(r.accuracy_oov() == doctest::Approx(0.80));
  CHECK(r.accuracy_non_oov() == doctest::Approx(0.90));
  // entire is the count-weighted mean of the two splits
  double weighted = (r.accuracy_oov() * r.total_oov + r.accuracy_non_oov() * r.total_non_oov) /
                    r.total;
  CHECK(r.accuracy_entire() == doctest::Approx(weighted));
}

TEST_CASE("noiseless pipeline baseline is perfect") {
  PhonemeInventory inv = PhonemeInventory::synthetic(24);
  EntitySynthesisConfig ecfg;
  ecfg.count = 30;
  ecfg.morpheme_count = 26;
  ecfg.max_slot_len = 6;
  ecfg.seed = 9;
  EntityDb db = synthesize_entities(inv, ecfg);
  PatternSynthesisConfig pcfg;
  pcfg.count = 3;
  pcfg.seed = 10;
  auto patterns = synthesize_patterns(inv, pcfg);
  DatasetParams params;
  params.n_train = 12;
  params.n_test = 8;
  params.oov_fraction = 0.2;
  params.noise.confusion_eps = 0.0;
  params.noise.blank_insert_prob = 0.0;
  params.noise.dur_min = params.noise.dur_max = 1;
  params.noise.seed = 505;
  fs::path dir = testutil::temp_dir("baseline_ds");
  build_dataset(inv, db, patterns, params, dir);
  LoadedDataset data = load_dataset(dir);

  for (double lm_weight : {0.0, 1.0}) {
    BaselineParams bp;
    bp.lm_weight = lm_weight;
    EvalReport report = pipeline_baseline(data, bp, 2);
    CHECK(report.accuracy_entire() == 1.0);
  }
}

TEST_CASE("baseline breaks score ties toward the smaller entity id") {
  PhonemeInventory inv = PhonemeInventory::synthetic(12);
  LoadedDataset data;
  data.inv = inv;
  data.db.add(Entity{"ea", {2, 3, 4}, ""});
  data.db.add(Entity{"eb", {2, 3, 5}, ""});
  data.patterns = {{"q0", {10, 11}, {}}};
  // hypothesis [2,3,6] is at distance 1 from both entities
  data.manifest.samples.push_back({"t0", "x", "eb", "q0", false, false});
  data.manifest.samples.push_back({"t1", "x", "ea", "q0", false, true});
  data.posteriors.push_back(one_hot_sequence({2, 3, 6}, inv));
  data.posteriors.push_back(one_hot_sequence({2, 3, 6}, inv));
  BaselineParams bp;
  bp.lm_weight = 0.0;
  EvalReport report = pipeline_baseline(data, bp, 1);
  REQUIRE(report.records.size() == 2);
  CHECK(report.records[0].predicted == "ea");
  CHECK_FALSE(report.records[0].correct);
  CHECK(report.records[1].predicted == "ea");
  CHECK(report.records[1].correct);
}

TEST_CASE("baseline strips the longest matching carrier") {
  PhonemeInventory inv = PhonemeInventory::synthetic(12);
  LoadedDataset data;
  data.inv = inv;
  data.db.add(Entity{"ea", {4, 5}, ""});
  data.db.add(Entity{"eb", {10, 11, 4, 5}, ""});
  // Two patterns; the longer prefix must win so the hypothesis is [4,5].
  data.patterns = {{"short", {10}, {}}, {"long", {10, 11}, {}}};
  data.manifest.samples.push_back({"t0", "x", "ea", "long", false, false});
  data.manifest.samples.push_back({"t1", "x", "ea", "long", false, true});
  data.posteriors.push_back(one_hot_sequence({10, 11, 4, 5}, inv));
  data.posteriors.push_back(one_hot_sequence({10, 11, 4, 5}, inv));
  BaselineParams bp;
  bp.lm_weight = 0.0;
  EvalReport report = pipeline_baseline(data, bp, 1);
  CHECK(report.records[0].predicted == "ea");
  CHECK(report.records[0].correct);
}

TEST_CASE("evaluation requires both slot classes in the test split") {
  PhonemeInventory inv = PhonemeInventory::synthetic(8);
  LoadedDataset data;
  data.inv = inv;
  data.db.add(Entity{"e0", {2, 3}, ""});
  data.patterns = {{"q0", {}, {}}};
  data.manifest.samples.push_back({"t0", "x", "e0", "q0", false, false});
  data.posteriors.push_back(one_hot_sequence({2, 3}, inv));
  BaselineParams bp;
  CHECK_THROWS_AS(pipeline_baseline(data, bp, 1), DataError);
}
