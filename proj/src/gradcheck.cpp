// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "synth.hpp"

namespace s2s {

const GradCheckParamReport* GradCheckReport::worst() const {
  const GradCheckParamReport* w = nullptr;
  for (const auto& p : per_param) {
    if (!w || p.max_rel_err > w->max_rel_err) w = &p;
  }
  return w;
}

GradCheckReport grad_check(const std::function<double(bool compute_grad)>& loss_fn,
                           ParamStore& params, double h, uint64_t seed, int min_coords) {
  if (h <= 0.0) throw ConfigError("finite-difference step must be positive");

  double probe1 = loss_fn(false);
  double probe2 = loss_fn(false);
  if (std::memcmp(&probe1, &probe2, sizeof(double)) != 0) {
    throw RuntimeError("loss is not deterministic between calls");
  }

  params.zero_grads();
  loss_fn(true);

  auto rng = make_rng(seed, kTagGradCheck);
  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    ParamEntry& e = params.at(pi);
    Tensor& t = e.tensor;
    int dim = static_cast<int>(t.data.size());
    int n_check = std::min(dim, std::max(1, min_coords));
    // Partial Fisher-Yates over the coordinate indices.
    std::vector<int> coords(dim);
    for (int i = 0; i < dim; ++i) coords[i] = i;
    GradCheckParamReport pr;
    pr.name = e.name;
    pr.coords_checked = n_check;
    for (int i = 0; i < n_check; ++i) {
      std::uniform_int_distribution<int> pick(i, dim - 1);
      std::swap(coords[i], coords[pick(rng)]);
      int c = coords[i];
      double saved = t.data[c];
      t.data[c] = saved + h;
      double lp = loss_fn(false);
      t.data[c] = saved - h;
      double lm = loss_fn(false);
      t.data[c] = saved;
      double numeric = (lp - lm) / (2.0 * h);
      double analytic = t.grad.empty() ? 0.0 : t.grad[c];
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      pr.max_rel_err = std::max(pr.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, pr.max_rel_err);
    report.per_param.push_back(std::move(pr));
  }
  return report;
}

GradCheckReport run_model_gradient_check(const ModelConfig& base_cfg, uint64_t seed,
                                         double h) {
  PhonemeInventory inv = PhonemeInventory::synthetic(20);
  ModelConfig cfg = base_cfg;
  cfg.vocab = inv.size();
  cfg.max_speech_len = std::min(cfg.max_speech_len, 20);
  cfg.max_slot_len = std::min(cfg.max_slot_len, 6);
  cfg.dropout = 0.0;  // the checked loss must be deterministic
  cfg.validate();

  auto rng = make_rng(seed, kTagGradCheck, 1);
  auto random_entity = [&](int len) {
    Entity e;
    std::uniform_int_distribution<int> pick(2, inv.size() - 1);
    for (int i = 0; i < len; ++i) e.phonemes.push_back(pick(rng));
    return e;
  };
  Entity gold = random_entity(4);
  gold.id = "gold";
  std::vector<Entity> negatives = {random_entity(3), random_entity(5)};

  std::vector<int> query = {2, 3};
  query.insert(query.end(), gold.phonemes.begin(), gold.phonemes.end());
  NoiseConfig noise;
  noise.confusion_eps = 0.3;
  noise.blank_insert_prob = 0.2;
  noise.dur_min = 1;
  noise.dur_max = 2;
  noise.confusable_k = 3;
  SynthResult synth = synthesize_posteriorgram(query, 2, 5, noise, inv, rng,
                                               cfg.max_speech_len);
  MaskPlan plan = mask_frames(synth.pg.frames, rng);

  // Knowledge reconstruction term so the knowledge mask head participates.
  std::vector<int> masked_tokens = gold.phonemes;
  int masked_pos = std::uniform_int_distribution<int>(0, static_cast<int>(masked_tokens.size()) - 1)(rng);
  int original_token = masked_tokens[masked_pos];
  masked_tokens[masked_pos] = PhonemeInventory::kPad;

  ParamStore params(seed);
  define_model_params(params, cfg);

  auto loss_fn = [&](bool compute_grad) {
    Graph g(&params, /*training=*/false, 0);
    auto enc = speech_encode(g, synth.pg, cfg, &plan);
    std::vector<double> mask_targets;
    mask_targets.reserve(plan.frames.size() * cfg.vocab);
    for (int f : plan.frames) {
      const double* row = synth.pg.row(f);
      mask_targets.insert(mask_targets.end(), row, row + cfg.vocab);
    }
    Var mask_loss = cross_entropy_soft(enc.mask_logits, mask_targets);

    CandidateScore gold_score = score_candidate(g, enc.memory, gold, cfg);
    Var match_loss = scale(gold_score.score_var, -1.0);
    std::vector<Var> scores = {gold_score.score_var};
    for (const auto& neg : negatives) {
      scores.push_back(score_candidate(g, enc.memory, neg, cfg).score_var);
    }
    Var contrast = cross_entropy(concat_cols(scores), {0});

    Var km = knowledge_encode(g, masked_tokens, cfg);
    Var recon_logits = add_rowvec(matmul(gather_rows(km, {masked_pos}),
                                         g.param("knowledge.mask_head.w")),
                                  g.param("knowledge.mask_head.b"));
    Var recon = cross_entropy(recon_logits, {original_token});

    Var total = add(add(match_loss, contrast), add(mask_loss, scale(recon, 0.5)));
    if (compute_grad) backward(total);
    return total->scalar();
  };

  return grad_check(loss_fn, params, h, seed);
}

}  // namespace s2s
