// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda.h"

#include <cstring>
#include <string>

#include "sequda/errors.hpp"
#include "sequda/pipeline.hpp"

namespace {

thread_local std::string g_last_error = "ok";

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error = "ok";
    return SEQUDA_OK;
  } catch (const sequda::SchemaError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_SCHEMA;
  } catch (const sequda::IoError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_IO;
  } catch (const sequda::DivergenceError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_DIVERGED;
  } catch (const sequda::DigestMismatchError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_DIGEST;
  } catch (const sequda::UnknownUserError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_UNKNOWN_USER;
  } catch (const sequda::GradCheckError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_GRADCHECK;
  } catch (const sequda::NoRunsError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_NO_RUNS;
  } catch (const sequda::WorkdirLockedError& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_LOCKED;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEQUDA_ERR_INVALID;
  } catch (...) {
    g_last_error = "unknown error";
    return SEQUDA_ERR_INVALID;
  }
}

int copy_out(const std::string& s, char* buf, size_t cap) {
  if (!buf || cap == 0) return SEQUDA_OK;
  const size_t n = s.size() < cap - 1 ? s.size() : cap - 1;
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  return SEQUDA_OK;
}

int require(const void* p, const char* what) {
  if (p) return SEQUDA_OK;
  g_last_error = std::string(what) + " must not be NULL";
  return SEQUDA_ERR_INVALID;
}

}  // namespace

struct sequda_model {
  sequda::LoadedRun run;
};

extern "C" {

const char* sequda_last_error(void) { return g_last_error.c_str(); }

int sequda_ingest(const char* csv_path, const char* user_col, const char* item_col,
                  const char* ts_col, const char* label_col, const char* out_dir) {
  if (int rc = require(csv_path, "csv_path")) return rc;
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] {
    sequda::SchemaMap schema;
    if (user_col) schema.user = user_col;
    if (item_col) schema.item = item_col;
    if (ts_col) schema.timestamp = ts_col;
    if (label_col) schema.label = label_col;
    sequda::cmd_ingest(csv_path, schema, out_dir);
  });
}

int sequda_synth(const char* out_dir, uint64_t seed, int n_users, int n_items, int n_blocks,
                 int seq_len, double noise) {
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] {
    if (n_users <= 0) {
      sequda::cmd_synth(out_dir, seed);
    } else {
      sequda::cmd_synth(out_dir, seed, n_users, n_items, n_blocks, seq_len, noise);
    }
  });
}

int sequda_train(const char* config_path, const char* workdir, int64_t seed_override,
                 const char* ablate, char* run_dir_out, size_t run_dir_cap) {
  if (int rc = require(config_path, "config_path")) return rc;
  if (int rc = require(workdir, "workdir")) return rc;
  return guarded([&] {
    sequda::RunConfig cfg = sequda::load_run_config(config_path);
    if (seed_override >= 0) cfg.train.seed = static_cast<uint64_t>(seed_override);
    if (ablate) sequda::apply_ablate_list(cfg.train, ablate);
    const std::string run_dir = sequda::cmd_train(cfg, workdir);
    copy_out(run_dir, run_dir_out, run_dir_cap);
  });
}

int sequda_evaluate(const char* checkpoint_dir, const char* dataset_dir, int k,
                    const char* out_path) {
  if (int rc = require(checkpoint_dir, "checkpoint_dir")) return rc;
  if (int rc = require(dataset_dir, "dataset_dir")) return rc;
  return guarded([&] {
    sequda::cmd_evaluate(checkpoint_dir, dataset_dir, k, out_path ? out_path : "");
  });
}

int sequda_augment(const char* checkpoint_dir, const char* dataset_dir, const char* out_dir) {
  if (int rc = require(checkpoint_dir, "checkpoint_dir")) return rc;
  if (int rc = require(dataset_dir, "dataset_dir")) return rc;
  if (int rc = require(out_dir, "out_dir")) return rc;
  return guarded([&] { sequda::cmd_augment(checkpoint_dir, dataset_dir, out_dir); });
}

int sequda_gradcheck(const char* scale, double tamper) {
  if (int rc = require(scale, "scale")) return rc;
  return guarded([&] { sequda::cmd_gradcheck(scale, tamper); });
}

int sequda_report(const char* workdir) {
  if (int rc = require(workdir, "workdir")) return rc;
  return guarded([&] { sequda::cmd_report(workdir); });
}

int sequda_model_load(const char* checkpoint_dir, const char* dataset_dir, sequda_model** out) {
  if (int rc = require(checkpoint_dir, "checkpoint_dir")) return rc;
  if (int rc = require(dataset_dir, "dataset_dir")) return rc;
  if (int rc = require(out, "out")) return rc;
  *out = nullptr;
  return guarded([&] {
    auto* m = new sequda_model{sequda::load_run(checkpoint_dir, dataset_dir)};
    *out = m;
  });
}

void sequda_model_free(sequda_model* model) { delete model; }

int sequda_model_recommend(sequda_model* model, const char* user_id, int k, char* buf,
                           size_t cap) {
  if (int rc = require(model, "model")) return rc;
  if (int rc = require(user_id, "user_id")) return rc;
  return guarded([&] {
    const std::string lines = sequda::recommend_lines(model->run, user_id, k);
    copy_out(lines, buf, cap);
  });
}

}  // extern "C"
