/* Copyright 2026 SeqUDA-Rec authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the SeqUDA-Rec pipeline. All functions return a
 * sequda_status; on failure sequda_last_error() describes the cause.
 * Status values double as CLI exit codes.
 */
#ifndef SEQUDA_H
#define SEQUDA_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sequda_status {
  SEQUDA_OK = 0,
  SEQUDA_ERR_SCHEMA = 2,       /* config/input schema violation */
  SEQUDA_ERR_IO = 3,           /* unreadable input / unwritable output */
  SEQUDA_ERR_DIVERGED = 4,     /* non-finite training loss */
  SEQUDA_ERR_DIGEST = 5,       /* checkpoint/dataset digest mismatch */
  SEQUDA_ERR_UNKNOWN_USER = 6, /* recommend: user not in vocab */
  SEQUDA_ERR_GRADCHECK = 7,    /* gradient check failure */
  SEQUDA_ERR_NO_RUNS = 8,      /* report: empty workdir */
  SEQUDA_ERR_LOCKED = 9,       /* workdir lock held by another run */
  SEQUDA_ERR_INVALID = 10      /* other invalid argument / internal error */
} sequda_status;

/* Message for the most recent failure on this thread. Never NULL. */
const char* sequda_last_error(void);

/* CSV -> dataset directory. Column names may be NULL for the defaults
 * (user_id, item_id, timestamp, label). */
int sequda_ingest(const char* csv_path, const char* user_col, const char* item_col,
                  const char* ts_col, const char* label_col, const char* out_dir);

/* Block-structured synthetic dataset. Pass n_users <= 0 to get the
 * defaults (200 users, 100 items, 4 blocks, seq_len 20, noise 0.1). */
int sequda_synth(const char* out_dir, uint64_t seed, int n_users, int n_items, int n_blocks,
                 int seq_len, double noise);

/* Trains per the JSON config. seed_override < 0 keeps the config seed;
 * ablate is a comma-separated flag list or NULL. The created run
 * directory path is copied into run_dir_out (run_dir_cap bytes) when
 * given. */
int sequda_train(const char* config_path, const char* workdir, int64_t seed_override,
                 const char* ablate, char* run_dir_out, size_t run_dir_cap);

/* Evaluates a checkpoint on the dataset's test targets; k <= 0 uses the
 * checkpointed eval_k. Writes metrics.json to out_path unless NULL. */
int sequda_evaluate(const char* checkpoint_dir, const char* dataset_dir, int k,
                    const char* out_path);

/* Augmentation only: writes augmented.jsonl + augment_audit.json. */
int sequda_augment(const char* checkpoint_dir, const char* dataset_dir, const char* out_dir);

/* Finite-difference gradient verification; scale is "toy" or "small".
 * tamper is a test hook that perturbs one analytic component. */
int sequda_gradcheck(const char* scale, double tamper);

/* Writes report.md + metrics.csv for all runs under workdir. */
int sequda_report(const char* workdir);

/* Opaque loaded model (checkpoint + dataset vocab). */
typedef struct sequda_model sequda_model;

int sequda_model_load(const char* checkpoint_dir, const char* dataset_dir, sequda_model** out);
void sequda_model_free(sequda_model* model);

/* Top-k recommendation lines for one external user id:
 * "rank\titem\tscore\n" per line, copied into buf (cap bytes). */
int sequda_model_recommend(sequda_model* model, const char* user_id, int k, char* buf,
                           size_t cap);

#ifdef __cplusplus
}
#endif

#endif /* SEQUDA_H */
