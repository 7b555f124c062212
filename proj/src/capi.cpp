// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0

#include "speech2slot.h"

#include <cmath>
#include <cstring>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "evalharness.hpp"
#include "gradcheck.hpp"
#include "infer.hpp"
#include "synth.hpp"
#include "train.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_output(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

s2s_status to_status(const s2s::Error& e) {
  g_last_error = e.what();
  return static_cast<s2s_status>(static_cast<int>(e.kind()));
}

template <typename Fn>
s2s_status guarded(Fn&& fn) {
  try {
    fn();
    return S2S_OK;
  } catch (const s2s::Error& e) {
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return S2S_ERROR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return S2S_ERROR_RUNTIME;
  }
}

std::string opt_path(const char* p) { return p ? std::string(p) : std::string(); }

s2s::InferOptions convert_options(const s2s_infer_options* opts) {
  s2s::InferOptions out;
  if (opts) {
    out.threshold = opts->threshold;
    out.edit_budget = opts->edit_budget;
    out.top_k = opts->top_k;
    out.max_candidates = opts->max_candidates;
  }
  return out;
}

}  // namespace

struct s2s_engine {
  s2s::Engine engine;
};

extern "C" {

const char* s2s_version(void) { return "0.1.0"; }

const char* s2s_last_error(void) { return g_last_error.c_str(); }

void s2s_string_free(char* s) { delete[] s; }

s2s_status s2s_generate_dataset(const char* config_path, const char* out_dir,
                                int64_t seed_override, int jobs, char** summary_json) {
  return guarded([&] {
    if (!out_dir || !*out_dir) throw s2s::ConfigError("output directory is required");
    s2s::CliConfig cfg = s2s::load_cli_config(opt_path(config_path));
    if (seed_override >= 0) {
      cfg.data_seed = static_cast<uint64_t>(seed_override);
      cfg.derive_seeds();
    }
    s2s::PhonemeInventory inv = cfg.make_inventory();
    s2s::EntityDb db = cfg.make_entities(inv);
    auto patterns = cfg.make_patterns(inv);
    s2s::Manifest manifest = s2s::build_dataset(inv, db, patterns, cfg.dataset_params(jobs),
                                                out_dir);
    nlohmann::json summary{{"samples", manifest.samples.size()},
                           {"train", manifest.count(true)},
                           {"test", manifest.count(false)},
                           {"test_oov", manifest.count_test_oov(true)},
                           {"test_non_oov", manifest.count_test_oov(false)},
                           {"entities", db.size()},
                           {"out_dir", out_dir}};
    set_output(summary_json, summary.dump());
  });
}

s2s_status s2s_train(const char* data_dir, const char* config_path, const char* out_ckpt,
                     int64_t seed_override, char** report_json) {
  return guarded([&] {
    if (!data_dir || !*data_dir) throw s2s::ConfigError("data directory is required");
    if (!out_ckpt || !*out_ckpt) throw s2s::ConfigError("output checkpoint path is required");
    s2s::CliConfig cfg = s2s::load_cli_config(opt_path(config_path));
    if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
    s2s::LoadedDataset data = s2s::load_dataset(data_dir);
    s2s::TrainReport report = s2s::train_model(data, cfg.model, cfg.train, out_ckpt);
    set_output(report_json, report.to_json().dump());
  });
}

s2s_status s2s_pretrain_knowledge(const char* config_path, const char* out_ckpt,
                                  char** report_json) {
  return guarded([&] {
    if (!out_ckpt || !*out_ckpt) throw s2s::ConfigError("output checkpoint path is required");
    s2s::CliConfig cfg = s2s::load_cli_config(opt_path(config_path));
    s2s::PhonemeInventory inv = cfg.make_inventory();
    s2s::EntityDb db = cfg.make_entities(inv);
    s2s::PretrainReport report =
        s2s::pretrain_knowledge(inv, db, cfg.model, cfg.train, out_ckpt);
    set_output(report_json, report.to_json().dump());
  });
}

s2s_status s2s_evaluate(const char* data_dir, const char* ckpt_path, const char* config_path,
                        int jobs, char** report_json) {
  return guarded([&] {
    if (!data_dir || !*data_dir) throw s2s::ConfigError("data directory is required");
    if (!ckpt_path || !*ckpt_path) throw s2s::ConfigError("checkpoint path is required");
    s2s::CliConfig cfg = s2s::load_cli_config(opt_path(config_path));
    s2s::LoadedDataset data = s2s::load_dataset(data_dir, jobs);
    s2s::Engine engine = s2s::Engine::load(ckpt_path);
    s2s::EvalReport report = s2s::evaluate(data, engine, cfg.infer, jobs);
    set_output(report_json, report.to_json().dump());
  });
}

s2s_status s2s_baseline(const char* data_dir, const char* config_path, int jobs,
                        char** report_json) {
  return guarded([&] {
    if (!data_dir || !*data_dir) throw s2s::ConfigError("data directory is required");
    s2s::CliConfig cfg = s2s::load_cli_config(opt_path(config_path));
    s2s::LoadedDataset data = s2s::load_dataset(data_dir, jobs);
    s2s::EvalReport report = s2s::pipeline_baseline(data, cfg.baseline, jobs);
    set_output(report_json, report.to_json().dump());
  });
}

s2s_status s2s_gradient_check(uint64_t base_seed, int seeds, char** report_json) {
  return guarded([&] {
    if (seeds < 1) throw s2s::ConfigError("need at least one seed");
    constexpr double kTolerance = 1e-3;
    nlohmann::json per_seed = nlohmann::json::array();
    double overall = 0.0;
    for (int i = 0; i < seeds; ++i) {
      uint64_t seed = base_seed + static_cast<uint64_t>(i);
      s2s::GradCheckReport report =
          s2s::run_model_gradient_check(s2s::ModelConfig::desk_preset(), seed);
      overall = std::max(overall, report.max_rel_err);
      const auto* worst = report.worst();
      per_seed.push_back({{"seed", seed},
                          {"max_rel_err", report.max_rel_err},
                          {"worst_param", worst ? worst->name : ""}});
    }
    nlohmann::json out{{"seeds", std::move(per_seed)},
                       {"max_rel_err", overall},
                       {"tolerance", kTolerance},
                       {"pass", overall < kTolerance}};
    set_output(report_json, out.dump());
    if (overall >= kTolerance) {
      throw s2s::RuntimeError("gradient check failed: max relative error " +
                              std::to_string(overall));
    }
  });
}

void s2s_infer_options_init(s2s_infer_options* opts) {
  if (!opts) return;
  opts->threshold = std::nan("");
  opts->edit_budget = 1;
  opts->top_k = 2;
  opts->max_candidates = 16;
}

s2s_status s2s_engine_open(const char* ckpt_path, s2s_engine** out) {
  return guarded([&] {
    if (!ckpt_path || !*ckpt_path) throw s2s::ConfigError("checkpoint path is required");
    if (!out) throw s2s::ConfigError("output handle is required");
    auto* handle = new s2s_engine{s2s::Engine::load(ckpt_path)};
    *out = handle;
  });
}

void s2s_engine_close(s2s_engine* engine) { delete engine; }

int32_t s2s_engine_entity_count(const s2s_engine* engine) {
  return engine ? static_cast<int32_t>(engine->engine.entities().size()) : -1;
}

s2s_status s2s_engine_infer_file(const s2s_engine* engine, const char* posterior_path,
                                 const s2s_infer_options* opts, char** result_json) {
  return guarded([&] {
    if (!engine) throw s2s::ConfigError("engine handle is null");
    if (!posterior_path || !*posterior_path) throw s2s::ConfigError("posterior path is required");
    s2s::Posteriorgram pg =
        s2s::read_posteriorgram(posterior_path, engine->engine.inventory());
    s2s::InferenceResult res = engine->engine.infer(pg, convert_options(opts));
    set_output(result_json, res.to_json().dump());
  });
}

s2s_status s2s_engine_infer_frames(const s2s_engine* engine, const float* frames,
                                   int32_t frame_count, int32_t phone_count,
                                   const s2s_infer_options* opts, char** result_json) {
  return guarded([&] {
    if (!engine) throw s2s::ConfigError("engine handle is null");
    if (!frames || frame_count < 1 || phone_count < 1) {
      throw s2s::ConfigError("invalid frame buffer");
    }
    s2s::Posteriorgram pg;
    pg.frames = frame_count;
    pg.phones = phone_count;
    pg.rows.resize(static_cast<size_t>(frame_count) * phone_count);
    for (size_t i = 0; i < pg.rows.size(); ++i) pg.rows[i] = static_cast<double>(frames[i]);
    s2s::validate_posteriorgram(pg);
    s2s::InferenceResult res = engine->engine.infer(pg, convert_options(opts));
    set_output(result_json, res.to_json().dump());
  });
}

}  // extern "C"
