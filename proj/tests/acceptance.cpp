// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on
// any failure. Each check uses an oracle independent of the library
// implementation wherever the criterion admits one.
#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "sequda/checkpoint.hpp"
#include "sequda/io_util.hpp"
#include "sequda/metrics.hpp"
#include "sequda/pipeline.hpp"

using namespace sequda;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, bool pass, const std::string& what) {
  std::printf("criterion %2d: %s  %s\n", n, pass ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Run a callable with stdout redirected to /dev/null (library commands
// print user-facing summaries that would clutter the criterion lines).
template <typename F>
auto quiet(F&& f) {
  std::fflush(stdout);
  const int saved = dup(1);
  const int devnull = open("/dev/null", O_WRONLY);
  dup2(devnull, 1);
  close(devnull);
  struct Restore {
    int saved;
    ~Restore() {
      std::fflush(stdout);
      dup2(saved, 1);
      close(saved);
    }
  } restore{saved};
  return f();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

RunConfig accept_config(const std::string& data_dir, std::uint64_t seed) {
  RunConfig cfg;
  cfg.data_dir = data_dir;
  TrainConfig& t = cfg.train;
  t.epochs = 30;
  t.batch = 64;
  t.lr = 1e-3;
  t.full_softmax = true;
  t.d = 32;
  t.n_heads = 2;
  t.n_layers = 2;
  t.max_len = 20;
  t.gnn_layers = 2;
  t.gan_dim = 48;
  t.n_neg = 50;
  t.seed = seed;
  t.gcl.batch = 64;
  t.gcl.lambda_gcl = 0.01;
  t.aug.ratio = 0.7;
  t.aug.gen_len = 15;
  t.aug.prefix_len = 3;
  t.aug.gan_epochs = 10;
  return cfg;
}

// ---------- criterion 2: brute-force metric / evaluation oracles ----------

int oracle_rank(const std::vector<double>& scores, int target) {
  int rank = 1;
  for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
    if (i == target) continue;
    if (scores[i] > scores[target]) ++rank;
    if (scores[i] == scores[target] && i < target) ++rank;
  }
  return rank;
}

bool criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);

  // Metric-definition oracles on randomized ranks.
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng.next_below(49));
    const int k = 1 + static_cast<int>(rng.next_below(n));
    const int rank = 1 + static_cast<int>(rng.next_below(n));
    const double hr_oracle = rank <= k ? 1.0 : 0.0;
    const double ndcg_oracle =
        rank <= k ? std::log(2.0) / std::log(static_cast<double>(rank) + 1.0) : 0.0;
    if (std::abs(hr_at_k(rank, k) - hr_oracle) > 1e-12) return false;
    if (std::abs(ndcg_at_k(rank, k) - ndcg_oracle) > 1e-12) return false;
    std::vector<int> ranks;
    double inv = 0.0;
    for (int i = 0; i < 5; ++i) {
      ranks.push_back(1 + static_cast<int>(rng.next_below(n)));
      inv += 1.0 / ranks.back();
    }
    if (std::abs(mrr(ranks) - inv / 5.0) > 1e-12) return false;
  }

  // Full-evaluation oracle: per-user direct scoring of every catalog item
  // and an explicit counting rank.
  for (int inst = 0; inst < 30; ++inst) {
    const int n_items = 8 + static_cast<int>(rng.next_below(43));
    const int n_users = 3 + static_cast<int>(rng.next_below(18));
    Vocab v;
    for (int u = 0; u < n_users; ++u) v.add_user("u" + std::to_string(u));
    for (int i = 0; i < n_items; ++i) v.add_item("i" + std::to_string(i));
    std::vector<UserSequence> seqs;
    for (int u = 0; u < n_users; ++u) {
      UserSequence s{u, {}};
      const int len = 3 + static_cast<int>(rng.next_below(10));
      for (int j = 0; j < len; ++j) s.items.push_back(static_cast<int>(rng.next_below(n_items)));
      seqs.push_back(std::move(s));
    }
    auto split = leave_one_out_split(std::move(seqs), v, "{}");

    TrainConfig tc;
    tc.d = 4;
    tc.n_heads = 2;
    tc.n_layers = 1;
    tc.max_len = 8;
    tc.gnn_layers = 1;
    tc.gan_dim = 4;
    Rng init(200 + inst);
    ModelBundle model = init_model(tc, n_users, n_items, init);

    const int k = 1 + static_cast<int>(rng.next_below(n_items));
    const auto rep = evaluate_model(model, nullptr, false, split, k);

    double hr_sum = 0.0, ndcg_sum = 0.0, mrr_sum = 0.0;
    for (std::size_t u = 0; u < split.n_eval_users(); ++u) {
      std::vector<int> prefix = split.test_prefix(u);
      if (static_cast<int>(prefix.size()) > tc.max_len)
        prefix.assign(prefix.end() - tc.max_len, prefix.end());
      const Matrix hidden = encode_sequence(prefix, model.seq, GraphFusion{});
      std::vector<double> scores(n_items);
      for (int i = 0; i < n_items; ++i) {
        std::vector<double> ce(model.seq.item_emb.row(i), model.seq.item_emb.row(i) + tc.d);
        scores[i] = score_candidate(hidden, static_cast<int>(prefix.size()), ce, model.head);
      }
      const int rank = oracle_rank(scores, split.test_target(u));
      hr_sum += rank <= k ? 1.0 : 0.0;
      ndcg_sum += rank <= k ? 1.0 / std::log2(rank + 1.0) : 0.0;
      mrr_sum += 1.0 / rank;
    }
    const double n = static_cast<double>(split.n_eval_users());
    if (std::abs(rep.hr - hr_sum / n) > 1e-12) return false;
    if (std::abs(rep.ndcg - ndcg_sum / n) > 1e-12) return false;
    if (std::abs(rep.mrr - mrr_sum / n) > 1e-12) return false;
  }
  return seconds_since(t0) < 10.0;
}

// ---------- criterion 4: dense propagation oracle ----------

bool criterion4() {
  Rng rng(404);
  for (int trial = 0; trial < 120; ++trial) {
    const int n_users = 1 + static_cast<int>(rng.next_below(10));
    const int n_items = 1 + static_cast<int>(rng.next_below(10));
    std::vector<UserSequence> seqs;
    for (int u = 0; u < n_users; ++u) {
      UserSequence s{u, {}};
      const int len = 1 + static_cast<int>(rng.next_below(6));
      for (int j = 0; j < len; ++j) s.items.push_back(static_cast<int>(rng.next_below(n_items)));
      seqs.push_back(std::move(s));
    }
    const Guig g = build_guig(seqs, n_users, n_items);
    const int n = g.n_nodes();
    const int d = 3;
    const int L = 1 + static_cast<int>(rng.next_below(3));
    Rng init(500 + trial);
    GnnParams params = GnnParams::init(init, n, d, L);

    const GraphView view = full_view(g);
    const NodeEmbeddings emb = propagate(view, params);

    // Dense oracle: row-normalized self-looped weighted adjacency.
    Matrix adj(n, n);
    for (int i = 0; i < n; ++i) adj(i, i) = 1.0;
    for (const auto& e : g.edges) {
      adj(e.user, g.item_node(e.item)) += e.weight;
      adj(g.item_node(e.item), e.user) += e.weight;
    }
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += adj(i, j);
      for (int j = 0; j < n; ++j) adj(i, j) /= row;
    }
    Matrix h = params.node_emb;
    Matrix readout = params.node_emb;
    for (int l = 0; l < L; ++l) {
      Matrix nxt = matmul(matmul(adj, h), transpose(params.weights[l]));
      if (l + 1 < L)
        for (double& x : nxt.data) x = relu(x);
      h = std::move(nxt);
      for (std::size_t i = 0; i < readout.size(); ++i) readout.data[i] += h.data[i];
    }
    for (double& x : readout.data) x /= static_cast<double>(L + 1);

    for (std::size_t i = 0; i < readout.size(); ++i)
      if (std::abs(readout.data[i] - emb.output.data[i]) > 1e-10) return false;
  }
  return true;
}

// ---------- criterion 6: random-ranker calibration ----------

bool criterion6() {
  Rng rng(606);
  double hr_sum = 0.0, mrr_sum = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> scores(100);
    for (double& s : scores) s = rng.next_double();
    const int rank = oracle_rank(scores, 0);
    hr_sum += rank <= 10 ? 1.0 : 0.0;
    mrr_sum += 1.0 / rank;
  }
  double h100 = 0.0;
  for (int i = 1; i <= 100; ++i) h100 += 1.0 / i;
  const double hr = hr_sum / trials, mr = mrr_sum / trials;
  return std::abs(hr - 0.100) <= 0.010 && std::abs(mr - h100 / 100.0) <= 0.005;
}

// ---------- criterion 10: invariance suite ----------

bool criterion10() {
  Rng rng(1010);
  // Attention-row normalization.
  for (int t = 0; t < 100; ++t) {
    Rng init(2000 + t);
    auto p = SeqEncoderParams::init(init, 15, 8, 2, 2, 12);
    std::vector<int> items(2 + rng.next_below(10));
    for (auto& it : items) it = static_cast<int>(rng.next_below(15));
    EncodeCache cache;
    encode_sequence(items, p, GraphFusion{}, &cache);
    for (const auto& layer : cache.layers)
      for (const auto& probs : layer.probs)
        for (std::size_t i = 0; i < items.size(); ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j <= i; ++j) s += probs(i, j);
          if (std::abs(s - 1.0) > 1e-12) return false;
        }
  }
  // Future-position perturbation invariance.
  for (int t = 0; t < 100; ++t) {
    Rng init(3000 + t);
    auto p = SeqEncoderParams::init(init, 15, 8, 2, 2, 12);
    std::vector<int> items(4 + rng.next_below(6));
    for (auto& it : items) it = static_cast<int>(rng.next_below(15));
    const Matrix h1 = encode_sequence(items, p, GraphFusion{});
    const std::size_t j = items.size() / 2 + rng.next_below(items.size() - items.size() / 2);
    std::vector<int> mod = items;
    mod[j] = (mod[j] + 1) % 15;
    const Matrix h2 = encode_sequence(mod, p, GraphFusion{});
    for (std::size_t i = 0; i < j; ++i)
      for (int c = 0; c < 8; ++c)
        if (h1(i, c) != h2(i, c)) return false;
  }
  // Cosine scale invariance.
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(8), b(8);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    const double s = 0.01 + 10.0 * rng.next_double();
    std::vector<double> a2 = a;
    for (double& x : a2) x *= s;
    if (std::abs(cosine_sim(a, b) - cosine_sim(a2, b)) > 1e-12) return false;
  }
  // REINFORCE zero gradient at zero advantage.
  for (int t = 0; t < 100; ++t) {
    Rng init(4000 + t);
    auto gen = GeneratorParams::init(init, 9, 4);
    auto grads = GeneratorParams::zeros_like(gen);
    std::vector<int> seq(5);
    for (auto& it : seq) it = static_cast<int>(rng.next_below(9));
    generator_reinforce_backward(gen, seq, 2, 0.0, grads, 1.0);
    ParamRegistry reg;
    gen.register_into(reg, &grads);
    for (const auto& g : reg.flatten_grads())
      if (g != 0.0) return false;
  }
  return true;
}

// ---------- criterion 11: checkpoint round trip ----------

bool criterion11(const std::string& dir) {
  TrainConfig tc;
  tc.d = 8;
  tc.n_heads = 2;
  tc.n_layers = 2;
  tc.max_len = 10;
  tc.gnn_layers = 2;
  tc.gan_dim = 8;
  Rng init(7);
  ModelBundle model = init_model(tc, 12, 20, init);
  ParamRegistry reg;
  model.register_values(reg);
  round_to_f32(reg);

  Rng rng(77);
  std::vector<std::vector<int>> prefixes;
  std::vector<int> cands;
  std::vector<double> before;
  for (int t = 0; t < 100; ++t) {
    std::vector<int> prefix(1 + rng.next_below(9));
    for (auto& it : prefix) it = static_cast<int>(rng.next_below(20));
    const int cand = static_cast<int>(rng.next_below(20));
    const Matrix hidden = encode_sequence(prefix, model.seq, GraphFusion{});
    std::vector<double> ce(model.seq.item_emb.row(cand), model.seq.item_emb.row(cand) + tc.d);
    before.push_back(
        score_candidate(hidden, static_cast<int>(prefix.size()), ce, model.head));
    prefixes.push_back(std::move(prefix));
    cands.push_back(cand);
  }

  CheckpointMeta meta;
  meta.config_json = "{}";
  meta.config_digest = "d";
  meta.vocab_digest = "v";
  save_checkpoint(dir, reg, meta);

  Rng init2(8);  // deliberately different init; the load must overwrite it
  ModelBundle loaded = init_model(tc, 12, 20, init2);
  ParamRegistry reg2;
  loaded.register_values(reg2);
  load_checkpoint(dir, reg2);

  for (int t = 0; t < 100; ++t) {
    const Matrix hidden = encode_sequence(prefixes[t], loaded.seq, GraphFusion{});
    std::vector<double> ce(loaded.seq.item_emb.row(cands[t]),
                           loaded.seq.item_emb.row(cands[t]) + tc.d);
    const double s =
        score_candidate(hidden, static_cast<int>(prefixes[t].size()), ce, loaded.head);
    if (s != before[t]) return false;
  }
  return true;
}

}  // namespace

int main() {
  TempDir tmp("sequda_acceptance");
  const std::string data_dir = tmp.sub("data");
  quiet([&] {
    cmd_synth(data_dir, 1);  // default desk-scale synthetic corpus
    return 0;
  });

  // 1. Published absolute figures are documented as not reproducible in
  //    the report header.
  {
    RunConfig cfg = accept_config(data_dir, 1);
    cfg.train.epochs = 1;
    quiet([&] { return cmd_train(cfg, tmp.sub("w1")); });
    const std::string md = quiet([&] { return cmd_report(tmp.sub("w1")); });
    const bool pass = md.find("not") != std::string::npos &&
                      md.find("reproducible") != std::string::npos &&
                      md.find("proprietary") != std::string::npos;
    report(1, pass, "report header documents non-reproducibility of published figures");
  }

  // 2. Metric and full-evaluation brute-force oracles.
  report(2, criterion2(), "metrics and full evaluate match brute-force oracles (1e-12)");

  // 3. Analytic gradients.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = run_gradcheck("toy");
    double worst = 0.0;
    for (const auto& item : rep.items) worst = std::max(worst, item.max_rel_err);
    const double secs = seconds_since(t0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "gradcheck toy: max rel err %.2e in %.1fs", worst, secs);
    report(3, rep.all_pass && worst < 1e-4 && secs < 30.0, buf);
  }

  // 4. Dense propagation oracle.
  report(4, criterion4(), "propagate matches the dense self-looped mean oracle (1e-10)");

  // 5. Contrastive anchors.
  {
    Matrix one(1, 4);
    one(0, 0) = 1.0;
    const double l1 = gcl_loss(one, one, {0}, 0.2).loss;
    Matrix flat(4, 4);
    for (int i = 0; i < 4; ++i) flat(i, 0) = 2.0;
    const double l4 = gcl_loss(flat, flat, {0, 1, 2, 3}, 0.5).loss;
    const bool pass = l1 == 0.0 && std::abs(l4 - std::log(4.0)) < 1e-9;
    report(5, pass, "contrastive anchors: batch-1 == 0, uniform B=4 == ln 4");
  }

  // 6. Random-ranker calibration.
  report(6, criterion6(), "random ranker: HR@10 = 0.100 +/- 0.010, MRR matches H_100/100");

  // 7 & 8. Directional lift on the synthetic corpus + ablation wiring.
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto split = load_dataset(data_dir);
    const Guig guig =
        build_guig(split.train_sequences(), split.vocab.n_users(), split.vocab.n_items());

    double full_sum = 0.0, base_sum = 0.0;
    bool wiring = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      RunConfig full = accept_config(data_dir, seed);
      const auto fo = train(split, guig, full.train);
      full_sum += evaluate_model(fo.model, &guig, true, split, 10).ndcg;

      RunConfig base = accept_config(data_dir, seed);
      base.train.no_gcl = true;
      base.train.no_gan = true;
      base.train.no_graph_fusion = true;
      const auto bo = train(split, guig, base.train);
      base_sum += evaluate_model(bo.model, nullptr, false, split, 10).ndcg;
      wiring = wiring && bo.counters.graph_calls == 0 && bo.counters.gan_calls == 0 &&
               bo.model.seq.alpha == 0.0;
    }
    const double full_ndcg = full_sum / 5.0, base_ndcg = base_sum / 5.0;
    const double pop_ndcg = popularity_metrics(split, 10).ndcg;
    const double secs = seconds_since(t0);
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "mean NDCG@10 over 5 seeds: full %.4f vs ablated %.4f vs popularity %.4f "
                  "(need +5%% rel) in %.0fs",
                  full_ndcg, base_ndcg, pop_ndcg, secs);
    report(7,
           full_ndcg >= 1.05 * base_ndcg && full_ndcg >= 1.05 * pop_ndcg && secs < 900.0,
           buf);
    report(8, wiring, "full ablation: zero graph/GAN invocations, fusion gate fixed at 0");
  }

  // 9. Byte-identical reruns.
  {
    RunConfig cfg = accept_config(data_dir, 3);
    cfg.train.epochs = 2;
    const std::string ra = quiet([&] { return cmd_train(cfg, tmp.sub("w9a")); });
    const std::string rb = quiet([&] { return cmd_train(cfg, tmp.sub("w9b")); });
    const bool pass = read_file(ra + "/history.jsonl") == read_file(rb + "/history.jsonl") &&
                      read_file(ra + "/metrics.json") == read_file(rb + "/metrics.json");
    report(9, pass, "identical config+seed: byte-identical history.jsonl and metrics.json");
  }

  // 10. Causality / normalization / invariance suite.
  report(10, criterion10(), "attention normalization, causality, cosine scale, REINFORCE zero");

  // 11. Checkpoint round trip.
  report(11, criterion11(tmp.sub("ckpt")), "save -> load -> forward bit-identical on 100 inputs");

  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 11 criteria passed\n");
  return 0;
}
