// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sequda/errors.hpp"
#include "sequda/io_util.hpp"
#include "sequda/sha256.hpp"

using nlohmann::json;

namespace sequda {

int Vocab::add_user(const std::string& key) {
  auto it = user_ix.find(key);
  if (it != user_ix.end()) return it->second;
  const int id = static_cast<int>(users.size());
  users.push_back(key);
  user_ix.emplace(key, id);
  return id;
}

int Vocab::add_item(const std::string& key) {
  auto it = item_ix.find(key);
  if (it != item_ix.end()) return it->second;
  const int id = static_cast<int>(items.size());
  items.push_back(key);
  item_ix.emplace(key, id);
  return id;
}

int Vocab::user_id(const std::string& key) const {
  auto it = user_ix.find(key);
  return it == user_ix.end() ? -1 : it->second;
}

int Vocab::item_id(const std::string& key) const {
  auto it = item_ix.find(key);
  return it == item_ix.end() ? -1 : it->second;
}

std::string Vocab::canonical_json() const {
  json j;
  json ju = json::object();
  for (std::size_t i = 0; i < users.size(); ++i) ju[users[i]] = i;
  json ji = json::object();
  for (std::size_t i = 0; i < items.size(); ++i) ji[items[i]] = i;
  j["users"] = std::move(ju);
  j["items"] = std::move(ji);
  return j.dump();
}

std::string Vocab::digest() const { return sha256_hex(canonical_json()); }

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

}  // namespace

IngestResult ingest_csv(std::istream& in, const SchemaMap& schema) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("ingest: empty input, no header row");
  const auto header = split_csv_line(line);
  auto col_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw SchemaError("ingest: missing column '" + name + "' in header");
  };
  const int cu = col_of(schema.user);
  const int ci = col_of(schema.item);
  const int ct = col_of(schema.timestamp);
  const int cl = col_of(schema.label);
  const int need = std::max({cu, ci, ct, cl}) + 1;

  IngestResult res;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++res.rows_seen;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) < need) {
      ++res.rows_skipped;
      continue;
    }
    const std::string& user = fields[cu];
    const std::string& item = fields[ci];
    std::int64_t ts = 0, label = 0;
    if (user.empty() || item.empty() || !parse_i64(fields[ct], ts) ||
        !parse_i64(fields[cl], label) || ts < 0 || (label != 0 && label != 1)) {
      ++res.rows_skipped;
      continue;
    }
    res.vocab.add_user(user);
    res.vocab.add_item(item);
    res.records.push_back({user, item, ts, static_cast<int>(label)});
  }
  if (res.rows_seen > 0 && res.rows_skipped * 2 > res.rows_seen)
    throw SchemaError("ingest: " + std::to_string(res.rows_skipped) + " of " +
                      std::to_string(res.rows_seen) +
                      " rows malformed (>50%); schema mapping is probably wrong");
  return res;
}

SequenceBuildResult build_sequences(const std::vector<InteractionRecord>& records,
                                    const Vocab& vocab, int min_len, int max_len) {
  if (records.empty()) throw std::invalid_argument("build_sequences: no records");
  struct Ev {
    std::int64_t ts;
    std::size_t order;
    int item;
    int label;
  };
  std::map<int, std::vector<Ev>> per_user;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const int u = vocab.user_id(r.user);
    const int it = vocab.item_id(r.item);
    if (u < 0 || it < 0) throw std::invalid_argument("build_sequences: record outside vocab");
    per_user[u].push_back({r.timestamp, i, it, r.label});
  }
  SequenceBuildResult out;
  for (auto& [u, evs] : per_user) {
    // Ties in timestamp break by input-file order (stable).
    std::stable_sort(evs.begin(), evs.end(),
                     [](const Ev& a, const Ev& b) { return a.ts < b.ts; });
    std::vector<int> clicks;
    for (const auto& e : evs) {
      if (e.label == 1)
        clicks.push_back(e.item);
      else
        out.impressions.emplace_back(u, e.item);
    }
    if (static_cast<int>(clicks.size()) < min_len) {
      ++out.users_dropped;
      continue;
    }
    if (static_cast<int>(clicks.size()) > max_len)
      clicks.erase(clicks.begin(), clicks.end() - max_len);
    out.sequences.push_back({u, std::move(clicks)});
  }
  return out;
}

std::vector<int> SplitDataset::train_items(std::size_t idx) const {
  const auto& s = sequences[idx].items;
  return std::vector<int>(s.begin(), s.end() - 2);
}

std::vector<int> SplitDataset::test_prefix(std::size_t idx) const {
  const auto& s = sequences[idx].items;
  return std::vector<int>(s.begin(), s.end() - 1);
}

int SplitDataset::valid_target(std::size_t idx) const {
  const auto& s = sequences[idx].items;
  return s[s.size() - 2];
}

int SplitDataset::test_target(std::size_t idx) const { return sequences[idx].items.back(); }

std::vector<UserSequence> SplitDataset::train_sequences() const {
  std::vector<UserSequence> out;
  out.reserve(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i)
    out.push_back({sequences[i].user, train_items(i)});
  return out;
}

std::string SplitDataset::dataset_digest() const {
  std::ostringstream ss;
  ss << vocab.canonical_json() << '\n';
  for (const auto& s : sequences) {
    ss << s.user << ':';
    for (int it : s.items) ss << it << ',';
    ss << '\n';
  }
  return sha256_hex(ss.str());
}

SplitDataset leave_one_out_split(std::vector<UserSequence> sequences, Vocab vocab,
                                 std::string provenance_json) {
  for (const auto& s : sequences)
    if (s.items.size() < 3)
      throw std::invalid_argument("leave_one_out_split: sequence for user " +
                                  std::to_string(s.user) + " shorter than 3");
  std::sort(sequences.begin(), sequences.end(),
            [](const UserSequence& a, const UserSequence& b) { return a.user < b.user; });
  SplitDataset ds;
  ds.vocab = std::move(vocab);
  ds.sequences = std::move(sequences);
  ds.provenance_json = std::move(provenance_json);
  return ds;
}

std::vector<int> sample_negatives(Rng& rng, const std::unordered_set<int>& history, int n,
                                  int vocab_size) {
  if (n < 0) throw std::invalid_argument("sample_negatives: n < 0");
  const int avail = vocab_size - static_cast<int>(history.size());
  if (avail < n)
    throw std::invalid_argument("sample_negatives: need " + std::to_string(n) +
                                " candidates but only " + std::to_string(avail) +
                                " of " + std::to_string(vocab_size) + " remain");
  std::vector<int> out;
  out.reserve(n);
  if (n == 0) return out;
  if (2 * n >= avail) {
    // Dense regime: partial Fisher-Yates over the explicit candidate list.
    std::vector<int> cands;
    cands.reserve(avail);
    for (int i = 0; i < vocab_size; ++i)
      if (!history.count(i)) cands.push_back(i);
    for (int k = 0; k < n; ++k) {
      const auto j = k + static_cast<int>(rng.next_below(cands.size() - k));
      std::swap(cands[k], cands[j]);
      out.push_back(cands[k]);
    }
  } else {
    std::unordered_set<int> used;
    while (static_cast<int>(out.size()) < n) {
      const int c = static_cast<int>(rng.next_below(vocab_size));
      if (history.count(c) || !used.insert(c).second) continue;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<InteractionRecord> make_synthetic(Rng& rng, int n_users, int n_items, int n_blocks,
                                              int seq_len, double noise) {
  if (n_blocks <= 0 || n_users % n_blocks != 0 || n_items % n_blocks != 0)
    throw std::invalid_argument("make_synthetic: n_blocks must divide n_users and n_items");
  if (noise < 0.0 || noise > 1.0) throw std::invalid_argument("make_synthetic: noise not in [0,1]");
  const int users_per_block = n_users / n_blocks;
  const int items_per_block = n_items / n_blocks;
  std::vector<InteractionRecord> out;
  out.reserve(static_cast<std::size_t>(n_users) * seq_len);
  for (int u = 0; u < n_users; ++u) {
    const int block = u / users_per_block;
    for (int t = 0; t < seq_len; ++t) {
      int item;
      if (rng.next_double() < noise)
        item = static_cast<int>(rng.next_below(n_items));
      else
        item = block * items_per_block + static_cast<int>(rng.next_below(items_per_block));
      out.push_back({"u" + std::to_string(u), "i" + std::to_string(item),
                     static_cast<std::int64_t>(t), 1});
    }
  }
  return out;
}

void save_dataset(const std::string& dir, const SplitDataset& ds) {
  ensure_dir(dir);
  atomic_write_file(dir + "/vocab.json", ds.vocab.canonical_json() + "\n");

  std::ostringstream seqs;
  json splits = json::object();
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto& s = ds.sequences[i];
    json line;
    line["user"] = s.user;
    line["items"] = s.items;
    seqs << line.dump() << '\n';
    json tgt;
    tgt["valid"] = ds.valid_target(i);
    tgt["test"] = ds.test_target(i);
    splits[std::to_string(s.user)] = std::move(tgt);
  }
  atomic_write_file(dir + "/sequences.jsonl", seqs.str());
  atomic_write_file(dir + "/splits.json", splits.dump() + "\n");
  atomic_write_file(dir + "/provenance.json",
                    (ds.provenance_json.empty() ? "{}" : ds.provenance_json) + "\n");
}

SplitDataset load_dataset(const std::string& dir) {
  SplitDataset ds;
  json jv = json::parse(read_file(dir + "/vocab.json"));
  {
    std::map<int, std::string> users, items;
    for (auto& [k, v] : jv.at("users").items()) users[v.get<int>()] = k;
    for (auto& [k, v] : jv.at("items").items()) items[v.get<int>()] = k;
    for (auto& [id, key] : users) {
      if (id != ds.vocab.n_users()) throw SchemaError("vocab.json: user ids not dense");
      ds.vocab.add_user(key);
    }
    for (auto& [id, key] : items) {
      if (id != ds.vocab.n_items()) throw SchemaError("vocab.json: item ids not dense");
      ds.vocab.add_item(key);
    }
  }
  {
    std::istringstream in(read_file(dir + "/sequences.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      UserSequence s;
      s.user = j.at("user").get<int>();
      s.items = j.at("items").get<std::vector<int>>();
      ds.sequences.push_back(std::move(s));
    }
  }
  json splits = json::parse(read_file(dir + "/splits.json"));
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto& s = ds.sequences[i];
    if (s.items.size() < 3) throw SchemaError("sequences.jsonl: sequence shorter than 3");
    const auto& tgt = splits.at(std::to_string(s.user));
    if (tgt.at("valid").get<int>() != ds.valid_target(i) ||
        tgt.at("test").get<int>() != ds.test_target(i))
      throw SchemaError("splits.json inconsistent with sequences.jsonl for user " +
                        std::to_string(s.user));
  }
  std::ifstream prov(dir + "/provenance.json");
  if (prov) {
    std::ostringstream ss;
    ss << prov.rdbuf();
    std::string p = ss.str();
    while (!p.empty() && (p.back() == '\n' || p.back() == '\r')) p.pop_back();
    ds.provenance_json = p;
  }
  return ds;
}

}  // namespace sequda
