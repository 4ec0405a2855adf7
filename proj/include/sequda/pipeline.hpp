// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sequda/dataset.hpp"
#include "sequda/train.hpp"

namespace sequda {

// Full run configuration: dataset location plus every module's knobs.
// Parsed from strict JSON (unknown keys rejected at every level); the
// SHA-256 of the canonical serialization is embedded in all outputs.
struct RunConfig {
  std::string data_dir;
  TrainConfig train;

  std::string canonical_json() const;
  std::string digest() const;
  // "full" or the sorted '+'-joined ablation flags.
  std::string arm() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

// Comma-separated ablation list ("no_gcl,no_gan,no_graph_fusion").
void apply_ablate_list(TrainConfig& cfg, const std::string& list);

struct IngestSummary {
  std::size_t rows_seen = 0;
  std::size_t rows_skipped = 0;
  std::size_t users_kept = 0;
  std::size_t users_dropped = 0;
  int n_users = 0;
  int n_items = 0;
};

IngestSummary cmd_ingest(const std::string& csv_path, const SchemaMap& schema,
                         const std::string& out_dir);

void cmd_synth(const std::string& out_dir, std::uint64_t seed, int n_users = 200,
               int n_items = 100, int n_blocks = 4, int seq_len = 20, double noise = 0.1);

// Trains per config, writes the run directory (config.json, history.jsonl,
// metrics.json, augment_audit.json, run.json, checkpoint/, graph exports)
// under workdir, and returns its path. Holds a lock file on workdir for
// the duration; a held lock raises WorkdirLockedError.
std::string cmd_train(const RunConfig& cfg, const std::string& workdir);

MetricsReport cmd_evaluate(const std::string& checkpoint_dir, const std::string& dataset_dir,
                           int k, const std::string& out_path);

// A checkpoint resolved against its dataset: config echo, parameters,
// and (when fusion is active) the propagated graph table, ready for
// repeated recommendation queries.
struct LoadedRun {
  RunConfig cfg;
  std::string config_digest;
  SplitDataset split;
  ModelBundle model;
  Guig guig;
  NodeEmbeddings graph_emb;
  bool fusion_on = false;
};

LoadedRun load_run(const std::string& checkpoint_dir, const std::string& dataset_dir);

// Formatted top-k lines: "rank\texternal_item_id\tscore" (9 decimals).
std::string recommend_lines(const LoadedRun& run, const std::string& user_key, int k);

std::string cmd_recommend(const std::string& checkpoint_dir, const std::string& dataset_dir,
                          const std::string& user_key, int k);

AugmentAudit cmd_augment(const std::string& checkpoint_dir, const std::string& dataset_dir,
                         const std::string& out_dir);

GradCheckReport cmd_gradcheck(const std::string& scale, double tamper = 0.0);

// Scans workdir run subdirectories and writes report.md + metrics.csv.
// Returns the markdown text. Refuses to compare runs whose dataset
// digests differ.
std::string cmd_report(const std::string& workdir);

}  // namespace sequda
