/* Copyright 2026 The speech2slot Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the slot-matching engine. The workflow functions mirror
 * the CLI subcommands; the engine handle wraps a trained checkpoint for
 * repeated inference. All functions return s2s_status; on failure
 * s2s_last_error() holds a thread-local description. Strings returned
 * through char** out-parameters are heap-allocated JSON documents and
 * must be released with s2s_string_free().
 */

#ifndef SPEECH2SLOT_H
#define SPEECH2SLOT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum s2s_status {
  S2S_OK = 0,
  S2S_ERROR_CONFIG = 2,
  S2S_ERROR_DATA = 3,
  S2S_ERROR_RUNTIME = 4
} s2s_status;

const char* s2s_version(void);

/* Message for the most recent failing call on this thread. */
const char* s2s_last_error(void);

void s2s_string_free(char* s);

/* Synthesizes a dataset directory (inventory, entities, patterns,
 * posteriorgrams, manifest). config_path may be NULL or empty for the
 * built-in defaults; seed_override < 0 keeps the config seed. */
s2s_status s2s_generate_dataset(const char* config_path, const char* out_dir,
                                int64_t seed_override, int jobs, char** summary_json);

/* Trains on the dataset directory's train split and writes a model
 * checkpoint. seed_override < 0 keeps the config seed. */
s2s_status s2s_train(const char* data_dir, const char* config_path, const char* out_ckpt,
                     int64_t seed_override, char** report_json);

/* Masked-phoneme pretraining of the knowledge encoder over the entity
 * database named by the config. */
s2s_status s2s_pretrain_knowledge(const char* config_path, const char* out_ckpt,
                                  char** report_json);

/* Accuracy on the dataset's test split, split by seen/unseen gold slots.
 * config_path (optional) supplies the inference options. */
s2s_status s2s_evaluate(const char* data_dir, const char* ckpt_path, const char* config_path,
                        int jobs, char** report_json);

/* Decode-then-look-up pipeline baseline on the same test split. */
s2s_status s2s_baseline(const char* data_dir, const char* config_path, int jobs,
                        char** report_json);

/* Finite-difference verification of the analytic gradients across
 * `seeds` independent seeds starting at base_seed. */
s2s_status s2s_gradient_check(uint64_t base_seed, int seeds, char** report_json);

typedef struct s2s_engine s2s_engine;

typedef struct s2s_infer_options {
  double threshold;   /* acceptance threshold; NaN = checkpoint default */
  int edit_budget;    /* fuzzy span matching budget */
  int top_k;          /* per-segment alternatives in the decoded lattice */
  int max_candidates; /* cap on spans handed to the scorer */
} s2s_infer_options;

void s2s_infer_options_init(s2s_infer_options* opts);

s2s_status s2s_engine_open(const char* ckpt_path, s2s_engine** out);
void s2s_engine_close(s2s_engine* engine);
int32_t s2s_engine_entity_count(const s2s_engine* engine);

/* Inference over a posteriorgram file; result is the inference JSON
 * {"best","score","span","candidates":[...]}. A NULL opts pointer uses
 * the defaults from s2s_infer_options_init. */
s2s_status s2s_engine_infer_file(const s2s_engine* engine, const char* posterior_path,
                                 const s2s_infer_options* opts, char** result_json);

/* Same, over an in-memory row-major frames x phones matrix. */
s2s_status s2s_engine_infer_frames(const s2s_engine* engine, const float* frames,
                                   int32_t frame_count, int32_t phone_count,
                                   const s2s_infer_options* opts, char** result_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SPEECH2SLOT_H */
