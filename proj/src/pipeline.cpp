// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "sequda/checkpoint.hpp"
#include "sequda/errors.hpp"
#include "sequda/guig.hpp"
#include "sequda/io_util.hpp"
#include "sequda/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace sequda {

namespace {

std::string fmt9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", x);
  return buf;
}

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// --- strict config parsing -------------------------------------------------

void require_keys(const json& obj, const std::string& where,
                  const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw SchemaError("config: " + where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError("config: unknown key \"" + key + "\" in " + where);
  }
}

double get_num(const json& obj, const char* key, double dflt, const std::string& where) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_number()) throw SchemaError("config: " + where + "." + key + " must be a number");
  return obj[key].get<double>();
}

int get_int(const json& obj, const char* key, int dflt, const std::string& where) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_number_integer())
    throw SchemaError("config: " + where + "." + key + " must be an integer");
  return obj[key].get<int>();
}

bool get_bool(const json& obj, const char* key, bool dflt, const std::string& where) {
  if (!obj.contains(key)) return dflt;
  if (!obj[key].is_boolean())
    throw SchemaError("config: " + where + "." + key + " must be a boolean");
  return obj[key].get<bool>();
}

struct LockFile {
  std::string path;
  int fd = -1;

  explicit LockFile(const std::string& workdir) : path(workdir + "/.lock") {
    fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST)
        throw WorkdirLockedError("workdir is locked by another run: " + path);
      throw IoError("cannot create lock file " + path);
    }
  }
  ~LockFile() {
    if (fd >= 0) {
      ::close(fd);
      ::unlink(path.c_str());
    }
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;
};

std::string history_jsonl(const std::vector<EpochStats>& history) {
  std::string out;
  for (const auto& st : history) {
    json j;
    j["epoch"] = st.epoch;
    j["rec_loss"] = st.rec_loss;
    if (st.gcl_loss) j["gcl_loss"] = *st.gcl_loss; else j["gcl_loss"] = nullptr;
    if (st.gan_d_loss) j["gan_d_loss"] = *st.gan_d_loss; else j["gan_d_loss"] = nullptr;
    if (st.gan_g_loss) j["gan_g_loss"] = *st.gan_g_loss; else j["gan_g_loss"] = nullptr;
    j["valid_hr"] = st.valid_hr;
    j["valid_ndcg"] = st.valid_ndcg;
    j["valid_mrr"] = st.valid_mrr;
    out += j.dump();
    out += "\n";
  }
  return out;
}

// Rebuilds the model described by a checkpoint against a dataset's vocab
// and loads the saved tensors into it.
struct LoadedModel {
  RunConfig cfg;
  CheckpointMeta meta;
  ModelBundle model;
};

LoadedModel load_model(const std::string& checkpoint_dir, const SplitDataset& split) {
  LoadedModel lm;
  lm.meta = read_checkpoint_meta(checkpoint_dir);
  if (lm.meta.vocab_digest != split.vocab.digest())
    throw DigestMismatchError("checkpoint vocab digest " + lm.meta.vocab_digest +
                              " does not match dataset vocab digest " + split.vocab.digest());
  lm.cfg = parse_run_config(lm.meta.config_json);
  Rng rng(lm.cfg.train.seed);
  Rng init_rng = rng.child(1);
  lm.model = init_model(lm.cfg.train, split.vocab.n_users(), split.vocab.n_items(), init_rng);
  ParamRegistry reg;
  lm.model.register_values(reg);
  load_checkpoint(checkpoint_dir, reg);
  return lm;
}

std::string metrics_line(const MetricsReport& rep) {
  std::ostringstream os;
  os << "HR@" << rep.k << " " << fmt9(rep.hr) << "  NDCG@" << rep.k << " " << fmt9(rep.ndcg)
     << "  MRR " << fmt9(rep.mrr) << "  users " << rep.n_users;
  return os.str();
}

}  // namespace

std::string RunConfig::canonical_json() const {
  const TrainConfig& t = train;
  json j;
  j["data_dir"] = data_dir;
  j["seed"] = t.seed;
  j["model"] = {{"d", t.d},
                {"n_heads", t.n_heads},
                {"n_layers", t.n_layers},
                {"max_len", t.max_len},
                {"gnn_layers", t.gnn_layers},
                {"gan_dim", t.gan_dim}};
  j["train"] = {{"epochs", t.epochs},     {"batch", t.batch},
                {"lr", t.lr},             {"beta1", t.beta1},
                {"beta2", t.beta2},       {"adam_eps", t.adam_eps},
                {"n_neg", t.n_neg},       {"full_softmax", t.full_softmax},
                {"dropout", t.dropout},   {"eval_k", t.eval_k}};
  j["gcl"] = {{"temperature", t.gcl.temperature},
              {"batch", t.gcl.batch},
              {"lambda_gcl", t.gcl.lambda_gcl},
              {"edge_dropout_p", t.gcl.edge_dropout_p},
              {"neighbor_cap", t.gcl.neighbor_cap}};
  j["gan"] = {{"ratio", t.aug.ratio},
              {"gen_len", t.aug.gen_len},
              {"prefix_len", t.aug.prefix_len},
              {"accept_threshold", t.aug.accept_threshold},
              {"baseline_decay", t.aug.baseline_decay},
              {"gan_epochs", t.aug.gan_epochs}};
  j["ablate"] = {{"no_gcl", t.no_gcl},
                 {"no_gan", t.no_gan},
                 {"no_graph_fusion", t.no_graph_fusion}};
  return j.dump(2) + "\n";
}

std::string RunConfig::digest() const { return sha256_hex(canonical_json()); }

std::string RunConfig::arm() const {
  std::vector<std::string> flags;
  if (train.no_gcl) flags.push_back("no_gcl");
  if (train.no_gan) flags.push_back("no_gan");
  if (train.no_graph_fusion) flags.push_back("no_graph_fusion");
  if (flags.empty()) return "full";
  std::string out;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (i) out += "+";
    out += flags[i];
  }
  return out;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw SchemaError("config: invalid JSON");
  require_keys(j, "top level", {"data_dir", "seed", "model", "train", "gcl", "gan", "ablate"});

  RunConfig cfg;
  TrainConfig& t = cfg.train;
  if (j.contains("data_dir")) {
    if (!j["data_dir"].is_string()) throw SchemaError("config: data_dir must be a string");
    cfg.data_dir = j["data_dir"].get<std::string>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw SchemaError("config: seed must be an integer");
    t.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    require_keys(m, "model", {"d", "n_heads", "n_layers", "max_len", "gnn_layers", "gan_dim"});
    t.d = get_int(m, "d", t.d, "model");
    t.n_heads = get_int(m, "n_heads", t.n_heads, "model");
    t.n_layers = get_int(m, "n_layers", t.n_layers, "model");
    t.max_len = get_int(m, "max_len", t.max_len, "model");
    t.gnn_layers = get_int(m, "gnn_layers", t.gnn_layers, "model");
    t.gan_dim = get_int(m, "gan_dim", t.gan_dim, "model");
  }
  if (j.contains("train")) {
    const json& tr = j["train"];
    require_keys(tr, "train",
                 {"epochs", "batch", "lr", "beta1", "beta2", "adam_eps", "n_neg", "full_softmax",
                  "dropout", "eval_k"});
    t.epochs = get_int(tr, "epochs", t.epochs, "train");
    t.batch = get_int(tr, "batch", t.batch, "train");
    t.lr = get_num(tr, "lr", t.lr, "train");
    t.beta1 = get_num(tr, "beta1", t.beta1, "train");
    t.beta2 = get_num(tr, "beta2", t.beta2, "train");
    t.adam_eps = get_num(tr, "adam_eps", t.adam_eps, "train");
    t.n_neg = get_int(tr, "n_neg", t.n_neg, "train");
    t.full_softmax = get_bool(tr, "full_softmax", t.full_softmax, "train");
    t.dropout = get_num(tr, "dropout", t.dropout, "train");
    t.eval_k = get_int(tr, "eval_k", t.eval_k, "train");
  }
  if (j.contains("gcl")) {
    const json& g = j["gcl"];
    require_keys(g, "gcl", {"temperature", "batch", "lambda_gcl", "edge_dropout_p", "neighbor_cap"});
    t.gcl.temperature = get_num(g, "temperature", t.gcl.temperature, "gcl");
    t.gcl.batch = get_int(g, "batch", t.gcl.batch, "gcl");
    t.gcl.lambda_gcl = get_num(g, "lambda_gcl", t.gcl.lambda_gcl, "gcl");
    t.gcl.edge_dropout_p = get_num(g, "edge_dropout_p", t.gcl.edge_dropout_p, "gcl");
    t.gcl.neighbor_cap = get_int(g, "neighbor_cap", t.gcl.neighbor_cap, "gcl");
  }
  if (j.contains("gan")) {
    const json& g = j["gan"];
    require_keys(g, "gan",
                 {"ratio", "gen_len", "prefix_len", "accept_threshold", "baseline_decay",
                  "gan_epochs"});
    t.aug.ratio = get_num(g, "ratio", t.aug.ratio, "gan");
    t.aug.gen_len = get_int(g, "gen_len", t.aug.gen_len, "gan");
    t.aug.prefix_len = get_int(g, "prefix_len", t.aug.prefix_len, "gan");
    t.aug.accept_threshold = get_num(g, "accept_threshold", t.aug.accept_threshold, "gan");
    t.aug.baseline_decay = get_num(g, "baseline_decay", t.aug.baseline_decay, "gan");
    t.aug.gan_epochs = get_int(g, "gan_epochs", t.aug.gan_epochs, "gan");
  }
  if (j.contains("ablate")) {
    const json& a = j["ablate"];
    require_keys(a, "ablate", {"no_gcl", "no_gan", "no_graph_fusion"});
    t.no_gcl = get_bool(a, "no_gcl", t.no_gcl, "ablate");
    t.no_gan = get_bool(a, "no_gan", t.no_gan, "ablate");
    t.no_graph_fusion = get_bool(a, "no_graph_fusion", t.no_graph_fusion, "ablate");
  }

  if (t.epochs < 0) throw SchemaError("config: train.epochs must be >= 0");
  if (t.batch < 1) throw SchemaError("config: train.batch must be >= 1");
  if (!(t.lr > 0.0)) throw SchemaError("config: train.lr must be positive");
  if (t.n_neg < 0) throw SchemaError("config: train.n_neg must be >= 0");
  if (t.d < 1 || t.n_heads < 1 || t.d % t.n_heads != 0)
    throw SchemaError("config: model.d must be a positive multiple of model.n_heads");
  if (t.n_layers < 1 || t.gnn_layers < 1 || t.max_len < 1 || t.gan_dim < 1)
    throw SchemaError("config: model dimensions must be >= 1");
  if (!(t.gcl.temperature > 0.0)) throw SchemaError("config: gcl.temperature must be positive");
  if (t.gcl.lambda_gcl < 0.0) throw SchemaError("config: gcl.lambda_gcl must be >= 0");
  if (t.aug.ratio < 0.0) throw SchemaError("config: gan.ratio must be >= 0");
  if (t.aug.accept_threshold < 0.0 || t.aug.accept_threshold >= 1.0)
    throw SchemaError("config: gan.accept_threshold must lie in [0, 1)");
  if (t.aug.gen_len < 1 || t.aug.prefix_len < 1 || t.aug.gan_epochs < 1)
    throw SchemaError("config: gan.gen_len, gan.prefix_len, gan.gan_epochs must be >= 1");
  if (t.eval_k < 1) throw SchemaError("config: train.eval_k must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

void apply_ablate_list(TrainConfig& cfg, const std::string& list) {
  std::stringstream ss(list);
  std::string flag;
  while (std::getline(ss, flag, ',')) {
    if (flag.empty()) continue;
    if (flag == "no_gcl") cfg.no_gcl = true;
    else if (flag == "no_gan") cfg.no_gan = true;
    else if (flag == "no_graph_fusion") cfg.no_graph_fusion = true;
    else throw SchemaError("unknown ablation flag \"" + flag + "\"");
  }
}

IngestSummary cmd_ingest(const std::string& csv_path, const SchemaMap& schema,
                         const std::string& out_dir) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw IoError("cannot open input CSV " + csv_path);
  IngestResult ing = ingest_csv(in, schema);
  SequenceBuildResult seqs = build_sequences(ing.records, ing.vocab);
  SplitDataset split = leave_one_out_split(std::move(seqs.sequences), std::move(ing.vocab), "");

  json prov;
  prov["source"] = "csv";
  prov["source_sha256"] = sha256_file_hex(csv_path);
  prov["schema"] = {{"user", schema.user},
                    {"item", schema.item},
                    {"timestamp", schema.timestamp},
                    {"label", schema.label}};
  prov["counts"] = {{"rows_seen", ing.rows_seen},
                    {"rows_skipped", ing.rows_skipped},
                    {"users_dropped", seqs.users_dropped},
                    {"users_kept", split.sequences.size()},
                    {"n_users", split.vocab.n_users()},
                    {"n_items", split.vocab.n_items()}};
  prov["split_protocol"] = "leave-one-out";
  prov["notes"] = json::array(
      {"only click (label=1) events form sequences; impressions are dropped from sequences",
       "validation and test targets contribute no graph edges",
       "the split protocol is this artifact's choice"});
  split.provenance_json = prov.dump(2) + "\n";

  save_dataset(out_dir, split);

  IngestSummary s;
  s.rows_seen = ing.rows_seen;
  s.rows_skipped = ing.rows_skipped;
  s.users_kept = split.sequences.size();
  s.users_dropped = seqs.users_dropped;
  s.n_users = split.vocab.n_users();
  s.n_items = split.vocab.n_items();
  std::printf("ingested %zu rows (%zu skipped), kept %zu users of %d (%d items)\n", s.rows_seen,
              s.rows_skipped, s.users_kept, s.n_users, s.n_items);
  return s;
}

void cmd_synth(const std::string& out_dir, std::uint64_t seed, int n_users, int n_items,
               int n_blocks, int seq_len, double noise) {
  Rng rng(seed);
  const auto records = make_synthetic(rng, n_users, n_items, n_blocks, seq_len, noise);
  Vocab vocab;
  for (int u = 0; u < n_users; ++u) vocab.add_user("u" + std::to_string(u));
  for (int i = 0; i < n_items; ++i) vocab.add_item("i" + std::to_string(i));
  SequenceBuildResult seqs = build_sequences(records, vocab, 3, seq_len);
  SplitDataset split = leave_one_out_split(std::move(seqs.sequences), std::move(vocab), "");

  json prov;
  prov["source"] = "synthetic";
  prov["config"] = {{"n_users", n_users},   {"n_items", n_items}, {"n_blocks", n_blocks},
                    {"seq_len", seq_len},   {"noise", noise},     {"seed", seed}};
  prov["split_protocol"] = "leave-one-out";
  split.provenance_json = prov.dump(2) + "\n";
  save_dataset(out_dir, split);
  std::printf("synthetic dataset: %d users, %d items, %d blocks, seq_len %d, noise %g -> %s\n",
              n_users, n_items, n_blocks, seq_len, noise, out_dir.c_str());
}

std::string cmd_train(const RunConfig& cfg, const std::string& workdir) {
  ensure_dir(workdir);
  LockFile lock(workdir);

  SplitDataset split = load_dataset(cfg.data_dir);
  const Guig guig =
      build_guig(split.train_sequences(), split.vocab.n_users(), split.vocab.n_items());

  TrainOutput out = train(split, guig, cfg.train);

  const bool fusion_on = !cfg.train.no_graph_fusion;
  MetricsReport rep = evaluate_model(out.model, fusion_on ? &guig : nullptr, fusion_on, split,
                                     cfg.train.eval_k, false, nullptr);
  rep.seed = cfg.train.seed;
  rep.config_digest = cfg.digest();

  const std::string run_dir = workdir + "/run-" + cfg.digest().substr(0, 12);
  ensure_dir(run_dir);

  atomic_write_file(run_dir + "/config.json", cfg.canonical_json());
  atomic_write_file(run_dir + "/history.jsonl", history_jsonl(out.history));
  atomic_write_file(run_dir + "/metrics.json", rep.to_json());
  atomic_write_file(run_dir + "/augment_audit.json", out.last_audit.to_json(cfg.train.aug));

  json runj;
  runj["arm"] = cfg.arm();
  runj["config_digest"] = cfg.digest();
  runj["dataset_digest"] = split.dataset_digest();
  runj["seed"] = cfg.train.seed;
  runj["best_epoch"] = out.best_epoch;
  atomic_write_file(run_dir + "/run.json", runj.dump(2) + "\n");

  {
    ParamRegistry reg;
    out.model.register_values(reg);
    CheckpointMeta meta;
    meta.config_json = cfg.canonical_json();
    meta.config_digest = cfg.digest();
    meta.vocab_digest = split.vocab.digest();
    save_checkpoint(run_dir + "/checkpoint", reg, meta);
  }

  if (fusion_on || !cfg.train.no_gcl) {
    std::ostringstream edges;
    export_edges_tsv(edges, guig);
    atomic_write_file(run_dir + "/edges.tsv", edges.str());

    const NodeEmbeddings emb = propagate(full_view(guig), out.model.gnn);
    std::string tsv;
    for (int u = 0; u < guig.n_users; ++u) {
      tsv += "user\t" + split.vocab.users[static_cast<std::size_t>(u)];
      for (int c = 0; c < out.model.gnn.d; ++c)
        tsv += "\t" + fmt17(emb.output(static_cast<std::size_t>(u), static_cast<std::size_t>(c)));
      tsv += "\n";
    }
    for (int i = 0; i < guig.n_items; ++i) {
      tsv += "item\t" + split.vocab.items[static_cast<std::size_t>(i)];
      const std::size_t row = static_cast<std::size_t>(guig.item_node(i));
      for (int c = 0; c < out.model.gnn.d; ++c)
        tsv += "\t" + fmt17(emb.output(row, static_cast<std::size_t>(c)));
      tsv += "\n";
    }
    atomic_write_file(run_dir + "/embeddings.tsv", tsv);
  }

  std::printf("run %s (%s): test %s\n", run_dir.c_str(), cfg.arm().c_str(),
              metrics_line(rep).c_str());
  return run_dir;
}

MetricsReport cmd_evaluate(const std::string& checkpoint_dir, const std::string& dataset_dir,
                           int k, const std::string& out_path) {
  SplitDataset split = load_dataset(dataset_dir);
  LoadedModel lm = load_model(checkpoint_dir, split);
  const bool fusion_on = !lm.cfg.train.no_graph_fusion;
  Guig guig;
  if (fusion_on)
    guig = build_guig(split.train_sequences(), split.vocab.n_users(), split.vocab.n_items());

  const int use_k = k > 0 ? k : lm.cfg.train.eval_k;
  MetricsReport rep = evaluate_model(lm.model, fusion_on ? &guig : nullptr, fusion_on, split,
                                     use_k, false, nullptr);
  rep.seed = lm.cfg.train.seed;
  rep.config_digest = lm.meta.config_digest;
  if (!out_path.empty()) atomic_write_file(out_path, rep.to_json());
  std::printf("%s\n", metrics_line(rep).c_str());
  return rep;
}

LoadedRun load_run(const std::string& checkpoint_dir, const std::string& dataset_dir) {
  LoadedRun run;
  run.split = load_dataset(dataset_dir);
  LoadedModel lm = load_model(checkpoint_dir, run.split);
  run.cfg = std::move(lm.cfg);
  run.config_digest = lm.meta.config_digest;
  run.model = std::move(lm.model);
  run.fusion_on = !run.cfg.train.no_graph_fusion;
  if (run.fusion_on) {
    run.guig = build_guig(run.split.train_sequences(), run.split.vocab.n_users(),
                          run.split.vocab.n_items());
    run.graph_emb = propagate(full_view(run.guig), run.model.gnn);
  }
  return run;
}

std::string recommend_lines(const LoadedRun& run, const std::string& user_key, int k) {
  const int uid = run.split.vocab.user_id(user_key);
  if (uid < 0) throw UnknownUserError("unknown user: " + user_key);
  // Eval users are stored in ascending dense user id, so the row index
  // equals the dense id.
  std::vector<int> prefix = run.split.sequences[static_cast<std::size_t>(uid)].items;
  const int max_len = run.model.seq.max_len;
  if (static_cast<int>(prefix.size()) > max_len)
    prefix.erase(prefix.begin(), prefix.end() - max_len);

  GraphFusion fusion;
  if (run.fusion_on) {
    fusion.nodes = &run.graph_emb.output;
    fusion.n_users = run.guig.n_users;
  }

  std::vector<int> all_items(run.split.vocab.n_items());
  for (int i = 0; i < run.split.vocab.n_items(); ++i) all_items[static_cast<std::size_t>(i)] = i;
  const auto ranking = rank_items(prefix, run.model.seq, run.model.head, fusion, all_items);

  std::string out;
  const int n = std::min<int>(k, static_cast<int>(ranking.size()));
  for (int r = 0; r < n; ++r) {
    const auto& [item, score] = ranking[static_cast<std::size_t>(r)];
    out += std::to_string(r + 1) + "\t" +
           run.split.vocab.items[static_cast<std::size_t>(item)] + "\t" + fmt9(score) + "\n";
  }
  return out;
}

std::string cmd_recommend(const std::string& checkpoint_dir, const std::string& dataset_dir,
                          const std::string& user_key, int k) {
  const LoadedRun run = load_run(checkpoint_dir, dataset_dir);
  return recommend_lines(run, user_key, k);
}

AugmentAudit cmd_augment(const std::string& checkpoint_dir, const std::string& dataset_dir,
                         const std::string& out_dir) {
  SplitDataset split = load_dataset(dataset_dir);
  LoadedModel lm = load_model(checkpoint_dir, split);
  ensure_dir(out_dir);

  Rng rng = Rng(lm.cfg.train.seed).child(7);
  const auto real = split.train_sequences();
  AugmentedPool pool = augment_pool(real, lm.model.gen, lm.model.disc, lm.cfg.train.aug, rng);

  std::string lines;
  for (std::size_t i = 0; i < pool.sequences.size(); ++i) {
    json j;
    j["user"] = pool.sequences[i].user;
    j["items"] = pool.sequences[i].items;
    j["synthetic"] = pool.synthetic[i] != 0;
    lines += j.dump();
    lines += "\n";
  }
  atomic_write_file(out_dir + "/augmented.jsonl", lines);
  atomic_write_file(out_dir + "/augment_audit.json", pool.audit.to_json(lm.cfg.train.aug));
  std::printf("augment: %zu generated, %zu accepted, mean score %s\n", pool.audit.generated,
              pool.audit.accepted, fmt9(pool.audit.mean_disc_score).c_str());
  return pool.audit;
}

GradCheckReport cmd_gradcheck(const std::string& scale, double tamper) {
  GradCheckReport rep = run_gradcheck(scale, tamper);
  for (const auto& it : rep.items)
    std::printf("%-22s max rel err %.3e  %s\n", it.name.c_str(), it.max_rel_err,
                it.pass ? "pass" : "FAIL");
  if (!rep.all_pass) throw GradCheckError("gradient check failed");
  return rep;
}

std::string cmd_report(const std::string& workdir) {
  struct Row {
    std::string name;
    std::string arm;
    std::string dataset_digest;
    double hr = 0.0, ndcg = 0.0, mrr = 0.0;
  };
  std::vector<Row> rows;
  if (fs::is_directory(workdir)) {
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(workdir))
      if (e.is_directory() && fs::exists(e.path() / "run.json") &&
          fs::exists(e.path() / "metrics.json"))
        dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      json runj = json::parse(read_file(d + "/run.json"));
      json met = json::parse(read_file(d + "/metrics.json"));
      Row r;
      r.name = fs::path(d).filename().string();
      r.arm = runj.value("arm", "?");
      r.dataset_digest = runj.value("dataset_digest", "");
      r.hr = met.value("hr_at_k", 0.0);
      r.ndcg = met.value("ndcg_at_k", 0.0);
      r.mrr = met.value("mrr", 0.0);
      rows.push_back(std::move(r));
    }
  }
  if (rows.empty()) throw NoRunsError("no completed runs found in " + workdir);
  for (const auto& r : rows)
    if (r.dataset_digest != rows.front().dataset_digest)
      throw DigestMismatchError("runs in " + workdir +
                                " were trained on different datasets; refusing to compare");

  const Row* base = nullptr;
  for (const auto& r : rows)
    if (r.arm == "no_gcl+no_gan+no_graph_fusion") base = &r;

  std::string md;
  md += "# Run comparison\n\n";
  md += "Results follow this artifact's local synthetic-benchmark protocol only.\n";
  md += "Externally published absolute figures for this model family are not\n";
  md += "reproducible here: the original datasets are proprietary, and their\n";
  md += "splits, hyperparameters, and baseline configurations are unpublished.\n";
  md += "Rows compare runs of this codebase on one shared dataset (digest\n";
  md += rows.front().dataset_digest.substr(0, 12) + ").\n\n";

  const bool deltas = base != nullptr && rows.size() > 1;
  md += "| run | arm | HR@10 | NDCG@10 | MRR |";
  if (deltas) md += " dHR | dNDCG | dMRR |";
  md += "\n|---|---|---|---|---|";
  if (deltas) md += "---|---|---|";
  md += "\n";

  std::string csv = "run,arm,hr,ndcg,mrr";
  if (deltas) csv += ",dhr,dndcg,dmrr";
  csv += "\n";

  auto rel = [](double v, double b) { return b != 0.0 ? (v - b) / b : 0.0; };
  for (const auto& r : rows) {
    md += "| " + r.name + " | " + r.arm + " | " + fmt9(r.hr) + " | " + fmt9(r.ndcg) + " | " +
          fmt9(r.mrr) + " |";
    csv += r.name + "," + r.arm + "," + fmt9(r.hr) + "," + fmt9(r.ndcg) + "," + fmt9(r.mrr);
    if (deltas) {
      md += " " + fmt9(rel(r.hr, base->hr)) + " | " + fmt9(rel(r.ndcg, base->ndcg)) + " | " +
            fmt9(rel(r.mrr, base->mrr)) + " |";
      csv += "," + fmt9(rel(r.hr, base->hr)) + "," + fmt9(rel(r.ndcg, base->ndcg)) + "," +
             fmt9(rel(r.mrr, base->mrr));
    }
    md += "\n";
    csv += "\n";
  }

  atomic_write_file(workdir + "/report.md", md);
  atomic_write_file(workdir + "/metrics.csv", csv);
  std::printf("%s", md.c_str());
  return md;
}

}  // namespace sequda
