// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sequda/rng.hpp"

namespace sequda {

// One (user, item, timestamp, click-label) event.
struct InteractionRecord {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
  int label = 0;
};

// Bijective external-key <-> dense-id maps for users and items.
struct Vocab {
  std::vector<std::string> users;  // dense id -> external key
  std::vector<std::string> items;
  std::unordered_map<std::string, int> user_ix;
  std::unordered_map<std::string, int> item_ix;

  int n_users() const { return static_cast<int>(users.size()); }
  int n_items() const { return static_cast<int>(items.size()); }

  int add_user(const std::string& key);
  int add_item(const std::string& key);
  int user_id(const std::string& key) const;  // -1 if unknown
  int item_id(const std::string& key) const;

  std::string canonical_json() const;
  std::string digest() const;  // SHA-256 of canonical_json()
};

struct SchemaMap {
  std::string user = "user_id";
  std::string item = "item_id";
  std::string timestamp = "timestamp";
  std::string label = "label";
};

struct IngestResult {
  std::vector<InteractionRecord> records;
  Vocab vocab;
  std::size_t rows_seen = 0;
  std::size_t rows_skipped = 0;
};

// Parses a header-row CSV with the four mapped columns. Malformed rows
// are counted and skipped; a missing column or a >50% malformed-row rate
// is a SchemaError (wrong schema, not dirty data).
IngestResult ingest_csv(std::istream& in, const SchemaMap& schema);

struct UserSequence {
  int user = -1;
  std::vector<int> items;  // ascending timestamp, ties by input order
};

struct SequenceBuildResult {
  std::vector<UserSequence> sequences;  // ascending user id
  std::size_t users_dropped = 0;
  // label==0 impressions, kept as natural negatives for the trainer.
  std::vector<std::pair<int, int>> impressions;
};

SequenceBuildResult build_sequences(const std::vector<InteractionRecord>& records,
                                    const Vocab& vocab, int min_len = 3, int max_len = 50);

// Per user: [x1..xn] -> train [x1..x(n-2)], valid target x(n-1), test
// target xn. Sequences must have length >= 3.
struct SplitDataset {
  Vocab vocab;
  // Full filtered sequences (train portion + valid + test targets),
  // ascending user id.
  std::vector<UserSequence> sequences;
  std::string provenance_json;  // canonical JSON string

  std::size_t n_eval_users() const { return sequences.size(); }
  std::vector<int> train_items(std::size_t idx) const;
  std::vector<int> valid_prefix(std::size_t idx) const { return train_items(idx); }
  std::vector<int> test_prefix(std::size_t idx) const;
  int valid_target(std::size_t idx) const;
  int test_target(std::size_t idx) const;
  std::vector<UserSequence> train_sequences() const;

  std::string dataset_digest() const;  // digest over vocab + sequences
};

SplitDataset leave_one_out_split(std::vector<UserSequence> sequences, Vocab vocab,
                                 std::string provenance_json);

// n distinct items uniform over vocab \ history. Throws when fewer than
// n candidates exist.
std::vector<int> sample_negatives(Rng& rng, const std::unordered_set<int>& history, int n,
                                  int vocab_size);

// Block-structured synthetic corpus: users and items are partitioned
// into n_blocks aligned blocks; each event picks an item uniformly from
// the user's own block with probability 1-noise, uniformly from the
// whole catalog otherwise. Timestamps strictly increase per user.
std::vector<InteractionRecord> make_synthetic(Rng& rng, int n_users, int n_items, int n_blocks,
                                              int seq_len, double noise);

// Dataset directory format: vocab.json, sequences.jsonl, splits.json,
// provenance.json.
void save_dataset(const std::string& dir, const SplitDataset& ds);
SplitDataset load_dataset(const std::string& dir);

}  // namespace sequda
