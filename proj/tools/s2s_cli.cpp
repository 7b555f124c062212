// Copyright 2026 The speech2slot Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Talks to the engine exclusively through the
// shared-library C interface; machine-readable output is JSON on stdout
// (or the --report file), diagnostics go to stderr.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "speech2slot.h"

namespace {

int fail(s2s_status status) {
  std::cerr << "error: " << s2s_last_error() << "\n";
  return static_cast<int>(status);
}

bool write_report(const std::string& path, const char* json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write report to " << path << "\n";
    return false;
  }
  out << json << "\n";
  return out.good();
}

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { s2s_string_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slot filling by matching: synthesize posteriorgram datasets, train the "
               "matcher, evaluate it against a pipeline baseline, and run inference."};
  app.require_subcommand(1);

  // gen-data
  std::string cfg_path, out_dir;
  int64_t seed = -1;
  int jobs = 0;
  auto* gen = app.add_subcommand("gen-data", "Synthesize a dataset directory");
  gen->add_option("--config", cfg_path, "Config JSON (defaults apply when omitted)");
  gen->add_option("--out", out_dir, "Output dataset directory")->required();
  gen->add_option("--seed", seed, "Override the dataset seed");
  gen->add_option("--jobs", jobs, "Worker threads (0 = all cores)");

  // train
  std::string train_data, train_cfg, train_out;
  int64_t train_seed = -1;
  auto* train = app.add_subcommand("train", "Train the matcher on a dataset directory");
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--config", train_cfg, "Config JSON");
  train->add_option("--out", train_out, "Output checkpoint path")->required();
  train->add_option("--seed", train_seed, "Override the training seed");

  // eval
  std::string eval_data, eval_ckpt, eval_report, eval_cfg;
  int eval_jobs = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--ckpt", eval_ckpt, "Model checkpoint")->required();
  eval->add_option("--report", eval_report, "Report JSON output path")->required();
  eval->add_option("--config", eval_cfg, "Config JSON (inference options)");
  eval->add_option("--jobs", eval_jobs, "Worker threads (0 = all cores)");

  // baseline
  std::string base_data, base_cfg, base_report;
  int base_jobs = 0;
  auto* baseline = app.add_subcommand("baseline", "Pipeline decode-then-look-up baseline");
  baseline->add_option("--data", base_data, "Dataset directory")->required();
  baseline->add_option("--config", base_cfg, "Config JSON (baseline options)");
  baseline->add_option("--report", base_report, "Report JSON output path")->required();
  baseline->add_option("--jobs", base_jobs, "Worker threads (0 = all cores)");

  // infer
  std::string infer_ckpt, infer_posterior;
  double threshold = std::nan("");
  int edit_budget = 1, top_k = 2, max_candidates = 16;
  auto* infer = app.add_subcommand("infer", "Match one posteriorgram file");
  infer->add_option("--ckpt", infer_ckpt, "Model checkpoint")->required();
  infer->add_option("--posterior", infer_posterior, "Posteriorgram file")->required();
  infer->add_option("--threshold", threshold, "Acceptance threshold (default: calibrated)");
  infer->add_option("--edit-budget", edit_budget, "Span detection edit budget (default 1)");
  infer->add_option("--top-k", top_k, "Per-segment alternatives (default 2)");
  infer->add_option("--max-candidates", max_candidates, "Candidate cap (default 16)");

  // pretrain-knowledge
  std::string pre_cfg, pre_out;
  auto* pretrain = app.add_subcommand("pretrain-knowledge",
                                      "Masked-phoneme pretraining of the knowledge encoder");
  pretrain->add_option("--config", pre_cfg, "Config JSON");
  pretrain->add_option("--out", pre_out, "Output checkpoint path")->required();

  // gradcheck
  int64_t gc_seed = 7;
  int gc_seeds = 5;
  auto* gradcheck = app.add_subcommand("gradcheck",
                                       "Verify analytic gradients against finite differences");
  gradcheck->add_option("--seed", gc_seed, "Base seed (default 7)");
  gradcheck->add_option("--seeds", gc_seeds, "Number of seeds (default 5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    OwnedString summary;
    s2s_status st = s2s_generate_dataset(cfg_path.c_str(), out_dir.c_str(), seed, jobs,
                                         &summary.ptr);
    if (st != S2S_OK) return fail(st);
    std::cout << summary.ptr << "\n";
    return 0;
  }
  if (train->parsed()) {
    OwnedString report;
    s2s_status st = s2s_train(train_data.c_str(), train_cfg.c_str(), train_out.c_str(),
                              train_seed, &report.ptr);
    if (st != S2S_OK) return fail(st);
    std::cout << report.ptr << "\n";
    return 0;
  }
  if (eval->parsed()) {
    OwnedString report;
    s2s_status st = s2s_evaluate(eval_data.c_str(), eval_ckpt.c_str(), eval_cfg.c_str(),
                                 eval_jobs, &report.ptr);
    if (st != S2S_OK) return fail(st);
    if (!write_report(eval_report, report.ptr)) return 3;
    return 0;
  }
  if (baseline->parsed()) {
    OwnedString report;
    s2s_status st = s2s_baseline(base_data.c_str(), base_cfg.c_str(), base_jobs, &report.ptr);
    if (st != S2S_OK) return fail(st);
    if (!write_report(base_report, report.ptr)) return 3;
    return 0;
  }
  if (infer->parsed()) {
    s2s_engine* engine = nullptr;
    s2s_status st = s2s_engine_open(infer_ckpt.c_str(), &engine);
    if (st != S2S_OK) return fail(st);
    s2s_infer_options opts;
    s2s_infer_options_init(&opts);
    opts.threshold = threshold;
    opts.edit_budget = edit_budget;
    opts.top_k = top_k;
    opts.max_candidates = max_candidates;
    OwnedString result;
    st = s2s_engine_infer_file(engine, infer_posterior.c_str(), &opts, &result.ptr);
    s2s_engine_close(engine);
    if (st != S2S_OK) return fail(st);
    std::cout << result.ptr << "\n";
    return 0;
  }
  if (pretrain->parsed()) {
    OwnedString report;
    s2s_status st = s2s_pretrain_knowledge(pre_cfg.c_str(), pre_out.c_str(), &report.ptr);
    if (st != S2S_OK) return fail(st);
    std::cout << report.ptr << "\n";
    return 0;
  }
  if (gradcheck->parsed()) {
    OwnedString report;
    s2s_status st = s2s_gradient_check(static_cast<uint64_t>(gc_seed), gc_seeds, &report.ptr);
    if (report.ptr) std::cout << report.ptr << "\n";
    if (st != S2S_OK) return fail(st);
    return 0;
  }
  return 2;
}
