// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

#include "sequda/errors.hpp"
#include "sequda/metrics.hpp"

namespace sequda {

namespace {

// Child-stream tags of the root rng.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochBase = 1000;
// Child-stream tags of the per-epoch rng.
constexpr std::uint64_t kGanStream = 1;
constexpr std::uint64_t kAugStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kNegStream = 4;
constexpr std::uint64_t kGclStream = 5;

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

std::vector<int> truncate_prefix(std::vector<int> prefix, int max_len) {
  if (static_cast<int>(prefix.size()) > max_len)
    prefix.erase(prefix.begin(), prefix.end() - max_len);
  return prefix;
}

}  // namespace

void ModelBundle::register_values(ParamRegistry& reg) {
  gnn.register_into(reg, nullptr);
  seq.register_into(reg, nullptr);
  head.register_into(reg, nullptr);
  gen.register_into(reg, nullptr);
  disc.register_into(reg, nullptr);
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["config_digest"] = config_digest;
  j["hr_at_k"] = hr;
  j["k"] = k;
  j["mrr"] = mrr;
  j["n_users"] = n_users;
  j["ndcg_at_k"] = ndcg;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ModelBundle init_model(const TrainConfig& cfg, int n_users, int n_items, Rng& rng) {
  ModelBundle m;
  Rng r_gnn = rng.child(1);
  Rng r_seq = rng.child(2);
  Rng r_head = rng.child(3);
  Rng r_gen = rng.child(4);
  Rng r_disc = rng.child(5);
  m.gnn = GnnParams::init(r_gnn, n_users + n_items, cfg.d, cfg.gnn_layers);
  const double alpha0 = cfg.no_graph_fusion ? 0.0 : 0.5;
  m.seq = SeqEncoderParams::init(r_seq, n_items, cfg.d, cfg.n_heads, cfg.n_layers, cfg.max_len,
                                 alpha0);
  m.head = TargetHeadParams::init(r_head, cfg.d);
  m.gen = GeneratorParams::init(r_gen, n_items, cfg.gan_dim);
  m.disc = DiscriminatorParams::init(r_disc, n_items, cfg.gan_dim);
  return m;
}

int rank_of(const std::vector<std::pair<int, double>>& ranking, int target) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (ranking[i].first == target) return static_cast<int>(i) + 1;
  throw std::invalid_argument("rank_of: target absent from ranking");
}

MetricsReport evaluate_model(const ModelBundle& model, const Guig* guig, bool use_fusion,
                             const SplitDataset& split, int k, bool use_valid,
                             ModuleCounters* counters) {
  NodeEmbeddings emb;
  GraphFusion fusion;
  if (use_fusion && guig != nullptr) {
    emb = propagate(full_view(*guig), model.gnn);
    if (counters) counters->graph_calls++;
    fusion.nodes = &emb.output;
    fusion.n_users = guig->n_users;
  }

  std::vector<int> all_items(split.vocab.n_items());
  std::iota(all_items.begin(), all_items.end(), 0);

  MetricsReport rep;
  rep.k = k;
  rep.n_users = static_cast<int>(split.n_eval_users());
  std::vector<int> ranks;
  ranks.reserve(split.n_eval_users());
  double hr_sum = 0.0, ndcg_sum = 0.0;
  for (std::size_t u = 0; u < split.n_eval_users(); ++u) {
    std::vector<int> prefix = use_valid ? split.valid_prefix(u) : split.test_prefix(u);
    prefix = truncate_prefix(std::move(prefix), model.seq.max_len);
    const int target = use_valid ? split.valid_target(u) : split.test_target(u);
    const auto ranking = rank_items(prefix, model.seq, model.head, fusion, all_items);
    const int r = rank_of(ranking, target);
    hr_sum += hr_at_k(r, k);
    ndcg_sum += ndcg_at_k(r, k);
    ranks.push_back(r);
  }
  if (!ranks.empty()) {
    rep.hr = hr_sum / static_cast<double>(ranks.size());
    rep.ndcg = ndcg_sum / static_cast<double>(ranks.size());
    rep.mrr = mrr(ranks);
  }
  return rep;
}

MetricsReport popularity_metrics(const SplitDataset& split, int k) {
  const int n_items = split.vocab.n_items();
  std::vector<std::int64_t> count(n_items, 0);
  for (std::size_t u = 0; u < split.n_eval_users(); ++u)
    for (int it : split.train_items(u)) count[it]++;

  std::vector<int> order(n_items);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (count[a] != count[b]) return count[a] > count[b];
    return a < b;
  });
  std::vector<int> pos(n_items);
  for (int i = 0; i < n_items; ++i) pos[order[i]] = i + 1;

  MetricsReport rep;
  rep.k = k;
  rep.n_users = static_cast<int>(split.n_eval_users());
  std::vector<int> ranks;
  double hr_sum = 0.0, ndcg_sum = 0.0;
  for (std::size_t u = 0; u < split.n_eval_users(); ++u) {
    const int r = pos[split.test_target(u)];
    hr_sum += hr_at_k(r, k);
    ndcg_sum += ndcg_at_k(r, k);
    ranks.push_back(r);
  }
  if (!ranks.empty()) {
    rep.hr = hr_sum / static_cast<double>(ranks.size());
    rep.ndcg = ndcg_sum / static_cast<double>(ranks.size());
    rep.mrr = mrr(ranks);
  }
  return rep;
}

TrainOutput train(const SplitDataset& split, const Guig& guig, const TrainConfig& cfg) {
  const int n_users = split.vocab.n_users();
  const int n_items = split.vocab.n_items();
  const bool fusion_on = !cfg.no_graph_fusion;

  Rng root(cfg.seed);
  Rng init_rng = root.child(kInitStream);

  TrainOutput out;
  out.model = init_model(cfg, n_users, n_items, init_rng);
  ModelBundle& m = out.model;

  GnnParams gnn_g = GnnParams::zeros_like(m.gnn);
  SeqEncoderParams seq_g = SeqEncoderParams::zeros_like(m.seq);
  TargetHeadParams head_g = TargetHeadParams::zeros_like(m.head);
  GeneratorParams gen_g = GeneratorParams::zeros_like(m.gen);
  DiscriminatorParams disc_g = DiscriminatorParams::zeros_like(m.disc);

  ParamRegistry reg_main;
  m.gnn.register_into(reg_main, &gnn_g);
  m.seq.register_into(reg_main, &seq_g);
  m.head.register_into(reg_main, &head_g);
  ParamRegistry reg_gan;
  m.gen.register_into(reg_gan, &gen_g);
  m.disc.register_into(reg_gan, &disc_g);
  Adam adam_main(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Adam adam_gan(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

  ParamRegistry reg_all;
  m.register_values(reg_all);
  auto snapshot_f32 = [&reg_all]() {
    std::vector<double> v = reg_all.flatten_values();
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
    return v;
  };

  const std::vector<UserSequence> real = split.train_sequences();
  const std::size_t batch_size = cfg.batch > 0 ? static_cast<std::size_t>(cfg.batch) : 1;
  double baseline = 0.5;

  double best_ndcg = -1.0;
  std::vector<double> best_vals;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng erng = root.child(kEpochBase + static_cast<std::uint64_t>(epoch));
    EpochStats st;
    st.epoch = epoch;

    // Adversarial phase + augmentation-pool refresh.
    AugmentedPool pool;
    if (!cfg.no_gan) {
      Rng grng = erng.child(kGanStream);
      double d_sum = 0.0, g_sum = 0.0;
      std::size_t steps = 0;
      for (int ge = 0; ge < cfg.aug.gan_epochs; ++ge) {
        for (std::size_t b0 = 0; b0 < real.size(); b0 += batch_size) {
          const std::size_t b1 = std::min(b0 + batch_size, real.size());
          std::vector<UserSequence> batch(real.begin() + b0, real.begin() + b1);
          reg_gan.zero_grads();
          const GanStepResult gs =
              train_gan_step(m.gen, m.disc, batch, grng, cfg.aug, gen_g, disc_g, baseline);
          adam_gan.step(reg_gan);
          out.counters.gan_calls++;
          d_sum += gs.disc_loss;
          g_sum += gs.gen_loss;
          ++steps;
        }
      }
      if (steps > 0) {
        st.gan_d_loss = d_sum / static_cast<double>(steps);
        st.gan_g_loss = g_sum / static_cast<double>(steps);
      }
      Rng prng = erng.child(kAugStream);
      pool = augment_pool(real, m.gen, m.disc, cfg.aug, prng);
      out.counters.gan_calls++;
      out.last_audit = pool.audit;
    } else {
      pool.sequences = real;
      pool.synthetic.assign(real.size(), 0);
    }

    // The fusion table is refreshed once per epoch from the full graph.
    NodeEmbeddings fuse_emb;
    GraphFusion fusion;
    if (fusion_on) {
      fuse_emb = propagate(full_view(guig), m.gnn);
      out.counters.graph_calls++;
      fusion.nodes = &fuse_emb.output;
      fusion.n_users = guig.n_users;
    }

    Rng srng = erng.child(kShuffleStream);
    Rng nrng = erng.child(kNegStream);
    Rng crng = erng.child(kGclStream);
    std::vector<std::size_t> order(pool.sequences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_indices(order, srng);

    // One sequence: shared causal encoding, then per-position BCE over
    // the positive and the sampled negatives via the shared-KV scorer.
    auto process_sequence = [&](const std::vector<int>& items, double inv_total) -> double {
      const int n = static_cast<int>(items.size());
      if (n < 2) return 0.0;
      std::vector<int> inputs(items.begin(), items.end() - 1);
      inputs = truncate_prefix(std::move(inputs), m.seq.max_len);
      const int offset = n - 1 - static_cast<int>(inputs.size());
      const int len = static_cast<int>(inputs.size());

      EncodeCache cache;
      encode_sequence(inputs, m.seq, fusion, &cache);
      const TargetKV kv = precompute_target_kv(cache.hidden, m.head);
      Matrix d_hidden(static_cast<std::size_t>(len), static_cast<std::size_t>(m.seq.d));
      Matrix d_k(kv.k.rows, kv.k.cols);
      Matrix d_v(kv.v.rows, kv.v.cols);

      std::unordered_set<int> hist(items.begin(), items.end());
      int n_eff = std::min(cfg.n_neg, n_items - static_cast<int>(hist.size()));
      if (n_eff < 0) n_eff = 0;

      auto add_cand_grad = [&](int item, const std::vector<double>& d_cand) {
        const double a = fusion.active() ? m.seq.alpha : 0.0;
        double* ie = seq_g.item_emb.row(static_cast<std::size_t>(item));
        if (fusion.active()) {
          const double* ge = fusion.nodes->row(static_cast<std::size_t>(fusion.n_users + item));
          const double* base = m.seq.item_emb.row(static_cast<std::size_t>(item));
          for (int c = 0; c < m.seq.d; ++c) {
            ie[c] += (1.0 - a) * d_cand[static_cast<std::size_t>(c)];
            seq_g.alpha += d_cand[static_cast<std::size_t>(c)] * (ge[c] - base[c]);
          }
        } else {
          for (int c = 0; c < m.seq.d; ++c) ie[c] += d_cand[static_cast<std::size_t>(c)];
        }
      };

      double loss = 0.0;
      for (int t = 1; t < n; ++t) {
        const int ctx_len = t - offset;
        if (ctx_len < 1) continue;
        const int pos_item = items[static_cast<std::size_t>(t)];
        if (cfg.full_softmax) {
          std::vector<double> logits(static_cast<std::size_t>(n_items));
          for (int i = 0; i < n_items; ++i) {
            TargetCache tc;
            const std::vector<double> ce = fused_item_embedding(m.seq, i, fusion);
            score_candidate_kv(kv, ctx_len, ce, m.head, &tc);
            logits[static_cast<std::size_t>(i)] = tc.logit;
          }
          std::vector<double> probs = softmax(logits);
          loss += -std::log(std::max(probs[static_cast<std::size_t>(pos_item)], 1e-300)) *
                  inv_total;
          for (int i = 0; i < n_items; ++i) {
            TargetCache tc;
            const std::vector<double> ce = fused_item_embedding(m.seq, i, fusion);
            score_candidate_kv(kv, ctx_len, ce, m.head, &tc);
            const double y = i == pos_item ? 1.0 : 0.0;
            const double d_logit = (probs[static_cast<std::size_t>(i)] - y) * inv_total;
            std::vector<double> d_cand(static_cast<std::size_t>(m.seq.d), 0.0);
            score_backward_kv(kv, m.head, tc, d_logit, head_g, d_k, d_v, d_cand);
            add_cand_grad(i, d_cand);
          }
        } else {
          std::vector<std::pair<int, double>> cands;
          cands.reserve(static_cast<std::size_t>(n_eff) + 1);
          cands.emplace_back(pos_item, 1.0);
          if (n_eff > 0)
            for (int neg : sample_negatives(nrng, hist, n_eff, n_items))
              cands.emplace_back(neg, 0.0);
          for (const auto& [cand, y] : cands) {
            TargetCache tc;
            const std::vector<double> ce = fused_item_embedding(m.seq, cand, fusion);
            const double p = score_candidate_kv(kv, ctx_len, ce, m.head, &tc);
            loss += bce_with_logit(tc.logit, y) * inv_total;
            const double d_logit = (p - y) * inv_total;
            std::vector<double> d_cand(static_cast<std::size_t>(m.seq.d), 0.0);
            score_backward_kv(kv, m.head, tc, d_logit, head_g, d_k, d_v, d_cand);
            add_cand_grad(cand, d_cand);
          }
        }
      }
      finish_kv_backward(cache.hidden, m.head, d_k, d_v, head_g, d_hidden);
      encode_backward(m.seq, fusion, cache, d_hidden, seq_g);
      return loss;
    };

    double rec_sum = 0.0;
    std::size_t rec_batches = 0;
    double gcl_sum = 0.0;
    std::size_t gcl_batches = 0;
    std::size_t batch_idx = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch_size) {
      const std::size_t b1 = std::min(b0 + batch_size, order.size());
      reg_main.zero_grads();

      // Example count for the batch-mean normalization of the BCE.
      std::size_t total = 0;
      for (std::size_t bi = b0; bi < b1; ++bi) {
        const auto& items = pool.sequences[order[bi]].items;
        const int n = static_cast<int>(items.size());
        if (n < 2) continue;
        if (cfg.full_softmax) {
          total += static_cast<std::size_t>(n - 1);
        } else {
          std::unordered_set<int> hist(items.begin(), items.end());
          int n_eff = std::min(cfg.n_neg, n_items - static_cast<int>(hist.size()));
          if (n_eff < 0) n_eff = 0;
          total += static_cast<std::size_t>(n - 1) * static_cast<std::size_t>(1 + n_eff);
        }
      }
      const double inv_total = total > 0 ? 1.0 / static_cast<double>(total) : 0.0;

      double batch_loss = 0.0;
      for (std::size_t bi = b0; bi < b1; ++bi)
        batch_loss += process_sequence(pool.sequences[order[bi]].items, inv_total);

      if (!cfg.no_gcl) {
        const double gl = contrastive_step(guig, m.gnn, cfg.gcl, crng.child(batch_idx), gnn_g,
                                           cfg.gcl.lambda_gcl);
        out.counters.graph_calls++;
        if (!std::isfinite(gl))
          throw DivergenceError("contrastive loss diverged at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_idx));
        gcl_sum += gl;
        gcl_batches++;
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("recommendation loss diverged at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch_idx));

      adam_main.step(reg_main);
      m.seq.alpha = fusion_on ? std::clamp(m.seq.alpha, 0.0, 1.0) : 0.0;

      rec_sum += batch_loss;
      rec_batches++;
      batch_idx++;
    }
    st.rec_loss = rec_batches > 0 ? rec_sum / static_cast<double>(rec_batches) : 0.0;
    if (!cfg.no_gcl)
      st.gcl_loss = gcl_batches > 0 ? gcl_sum / static_cast<double>(gcl_batches) : 0.0;

    const MetricsReport vm = evaluate_model(m, fusion_on ? &guig : nullptr, fusion_on, split,
                                            cfg.eval_k, true, &out.counters);
    st.valid_hr = vm.hr;
    st.valid_ndcg = vm.ndcg;
    st.valid_mrr = vm.mrr;
    out.history.push_back(st);

    if (vm.ndcg > best_ndcg) {
      best_ndcg = vm.ndcg;
      best_vals = snapshot_f32();
      out.best_epoch = epoch;
    }
  }

  if (best_vals.empty()) best_vals = snapshot_f32();
  reg_all.unflatten_values(best_vals);
  return out;
}

namespace {

struct GradCheckDims {
  int d;
  int seq_len;
  int n_items;
  int gnn_nodes;
};

GradCheckDims dims_for(const std::string& scale) {
  if (scale == "toy") return {8, 4, 10, 6};
  if (scale == "small") return {16, 8, 20, 10};
  throw std::invalid_argument("run_gradcheck: scale must be \"toy\" or \"small\"");
}

}  // namespace

GradCheckReport run_gradcheck(const std::string& scale, double tamper, double tolerance) {
  const GradCheckDims dm = dims_for(scale);
  const double eps = 1e-5;
  GradCheckReport rep;

  auto push = [&](const std::string& name, double err) {
    rep.items.push_back({name, err, err < tolerance});
  };

  // 1. Contrastive objective on explicit view tables.
  {
    Rng rng(11);
    const int b = 3;
    Matrix a(static_cast<std::size_t>(b), static_cast<std::size_t>(dm.d));
    Matrix bb(static_cast<std::size_t>(b), static_cast<std::size_t>(dm.d));
    for (double& x : a.data) x = rng.normal();
    for (double& x : bb.data) x = rng.normal();
    std::vector<int> batch(b);
    std::iota(batch.begin(), batch.end(), 0);
    const double temp = 0.2;

    std::vector<double> params = a.data;
    params.insert(params.end(), bb.data.begin(), bb.data.end());
    auto f = [&](const std::vector<double>& p) {
      Matrix pa = a, pb = bb;
      std::copy(p.begin(), p.begin() + static_cast<long>(a.size()), pa.data.begin());
      std::copy(p.begin() + static_cast<long>(a.size()), p.end(), pb.data.begin());
      return gcl_loss(pa, pb, batch, temp).loss;
    };
    const GclResult res = gcl_loss(a, bb, batch, temp);
    std::vector<double> analytic = res.grad_a.data;
    analytic.insert(analytic.end(), res.grad_b.data.begin(), res.grad_b.data.end());
    if (tamper != 0.0 && !analytic.empty()) analytic[0] += tamper;
    push("gcl_loss", grad_check(f, params, analytic, eps));
  }

  // 2. Recommendation BCE through the full encoder and scoring head.
  {
    Rng rng(12);
    SeqEncoderParams seq = SeqEncoderParams::init(rng, dm.n_items, dm.d, 2, 2, dm.seq_len + 2);
    TargetHeadParams head = TargetHeadParams::init(rng, dm.d);
    GraphFusion no_fusion;
    std::vector<int> items(static_cast<std::size_t>(dm.seq_len) + 1);
    for (auto& it : items) it = static_cast<int>(rng.next_below(dm.n_items));
    // Fixed negatives keep the objective a pure function of the params.
    std::vector<std::vector<int>> negs(items.size());
    for (std::size_t t = 1; t < items.size(); ++t)
      for (int j = 0; j < 2; ++j)
        negs[t].push_back(static_cast<int>(rng.next_below(dm.n_items)));

    auto loss_of = [&](const SeqEncoderParams& sp, const TargetHeadParams& hp) {
      EncodeCache cache;
      std::vector<int> inputs(items.begin(), items.end() - 1);
      encode_sequence(inputs, sp, no_fusion, &cache);
      const TargetKV kv = precompute_target_kv(cache.hidden, hp);
      double loss = 0.0;
      std::size_t cnt = 0;
      for (std::size_t t = 1; t < items.size(); ++t) {
        std::vector<std::pair<int, double>> cands{{items[t], 1.0}};
        for (int ng : negs[t]) cands.emplace_back(ng, 0.0);
        for (const auto& [cand, y] : cands) {
          TargetCache tc;
          score_candidate_kv(kv, static_cast<int>(t), fused_item_embedding(sp, cand, no_fusion),
                             hp, &tc);
          loss += bce_with_logit(tc.logit, y);
          cnt++;
        }
      }
      return loss / static_cast<double>(cnt);
    };

    SeqEncoderParams scratch_seq = seq;
    TargetHeadParams scratch_head = head;
    ParamRegistry scratch_reg;
    scratch_seq.register_into(scratch_reg, nullptr);
    scratch_head.register_into(scratch_reg, nullptr);
    auto f = [&](const std::vector<double>& p) {
      scratch_reg.unflatten_values(p);
      return loss_of(scratch_seq, scratch_head);
    };

    SeqEncoderParams seq_g = SeqEncoderParams::zeros_like(seq);
    TargetHeadParams head_g = TargetHeadParams::zeros_like(head);
    {
      EncodeCache cache;
      std::vector<int> inputs(items.begin(), items.end() - 1);
      encode_sequence(inputs, seq, no_fusion, &cache);
      const TargetKV kv = precompute_target_kv(cache.hidden, head);
      Matrix d_hidden(cache.hidden.rows, cache.hidden.cols);
      Matrix d_k(kv.k.rows, kv.k.cols);
      Matrix d_v(kv.v.rows, kv.v.cols);
      std::size_t cnt = 0;
      for (std::size_t t = 1; t < items.size(); ++t) cnt += 1 + negs[t].size();
      const double w = 1.0 / static_cast<double>(cnt);
      for (std::size_t t = 1; t < items.size(); ++t) {
        std::vector<std::pair<int, double>> cands{{items[t], 1.0}};
        for (int ng : negs[t]) cands.emplace_back(ng, 0.0);
        for (const auto& [cand, y] : cands) {
          TargetCache tc;
          const double p =
              score_candidate_kv(kv, static_cast<int>(t),
                                 fused_item_embedding(seq, cand, no_fusion), head, &tc);
          std::vector<double> d_cand(static_cast<std::size_t>(dm.d), 0.0);
          score_backward_kv(kv, head, tc, (p - y) * w, head_g, d_k, d_v, d_cand);
          double* ie = seq_g.item_emb.row(static_cast<std::size_t>(cand));
          for (int c = 0; c < dm.d; ++c) ie[c] += d_cand[static_cast<std::size_t>(c)];
        }
      }
      finish_kv_backward(cache.hidden, head, d_k, d_v, head_g, d_hidden);
      encode_backward(seq, no_fusion, cache, d_hidden, seq_g);
    }
    ParamRegistry grad_reg;
    seq_g.register_into(grad_reg, nullptr);
    head_g.register_into(grad_reg, nullptr);
    std::vector<double> analytic = grad_reg.flatten_values();
    // alpha has no effect without fusion; its finite difference is 0.
    ParamRegistry base_reg;
    seq.register_into(base_reg, nullptr);
    head.register_into(base_reg, nullptr);
    push("encoder_bce", grad_check(f, base_reg.flatten_values(), analytic, eps));
  }

  // 3. Target-attention / CTR head alone, fixed hidden states.
  {
    Rng rng(13);
    TargetHeadParams head = TargetHeadParams::init(rng, dm.d);
    Matrix hidden(static_cast<std::size_t>(dm.seq_len), static_cast<std::size_t>(dm.d));
    for (double& x : hidden.data) x = 0.3 * rng.normal();
    std::vector<double> cand(static_cast<std::size_t>(dm.d));
    for (double& x : cand) x = 0.3 * rng.normal();

    TargetHeadParams scratch = head;
    ParamRegistry scratch_reg;
    scratch.register_into(scratch_reg, nullptr);
    auto f = [&](const std::vector<double>& p) {
      scratch_reg.unflatten_values(p);
      TargetCache tc;
      score_candidate(hidden, dm.seq_len, cand, scratch, &tc);
      return bce_with_logit(tc.logit, 1.0);
    };

    TargetHeadParams head_g = TargetHeadParams::zeros_like(head);
    Matrix d_hidden(hidden.rows, hidden.cols);
    std::vector<double> d_cand(cand.size(), 0.0);
    TargetCache tc;
    const double p = score_candidate(hidden, dm.seq_len, cand, head, &tc);
    score_backward(hidden, head, tc, p - 1.0, head_g, d_hidden, d_cand);
    ParamRegistry grad_reg;
    head_g.register_into(grad_reg, nullptr);
    ParamRegistry base_reg;
    head.register_into(base_reg, nullptr);
    push("target_ctr", grad_check(f, base_reg.flatten_values(), grad_reg.flatten_values(), eps));
  }

  // 4. Discriminator BCE.
  {
    Rng rng(14);
    DiscriminatorParams disc = DiscriminatorParams::init(rng, dm.n_items, dm.d);
    std::vector<int> seq{1, 2, 3, 1};

    DiscriminatorParams scratch = disc;
    ParamRegistry scratch_reg;
    scratch.register_into(scratch_reg, nullptr);
    auto f = [&](const std::vector<double>& p) {
      scratch_reg.unflatten_values(p);
      DiscriminatorParams dummy = DiscriminatorParams::zeros_like(scratch);
      return discriminator_backward(scratch, seq, 1.0, dummy, 0.0);
    };

    DiscriminatorParams disc_g = DiscriminatorParams::zeros_like(disc);
    discriminator_backward(disc, seq, 1.0, disc_g, 1.0);
    ParamRegistry grad_reg;
    disc_g.register_into(grad_reg, nullptr);
    ParamRegistry base_reg;
    disc.register_into(base_reg, nullptr);
    push("disc_bce", grad_check(f, base_reg.flatten_values(), grad_reg.flatten_values(), eps));
  }

  // 5. End-to-end contrastive pipeline on a tiny graph.
  {
    Rng rng(15);
    const int users = dm.gnn_nodes / 2;
    const int items = dm.gnn_nodes - users;
    std::vector<UserSequence> seqs;
    for (int u = 0; u < users; ++u) {
      UserSequence s;
      s.user = u;
      s.items.push_back(u % items);
      s.items.push_back((u + 1) % items);
      seqs.push_back(s);
    }
    const Guig g = build_guig(seqs, users, items);
    GnnParams gnn = GnnParams::init(rng, g.n_nodes(), 4, 2);
    GclConfig gc;
    gc.batch = g.n_nodes();
    gc.edge_dropout_p = 0.3;
    gc.neighbor_cap = 2;

    GnnParams scratch = gnn;
    ParamRegistry scratch_reg;
    scratch.register_into(scratch_reg, nullptr);
    auto f = [&](const std::vector<double>& p) {
      scratch_reg.unflatten_values(p);
      GnnParams dummy = GnnParams::zeros_like(scratch);
      return contrastive_step(g, scratch, gc, Rng(99), dummy, 1.0);
    };

    GnnParams gnn_g = GnnParams::zeros_like(gnn);
    contrastive_step(g, gnn, gc, Rng(99), gnn_g, 1.0);
    ParamRegistry grad_reg;
    gnn_g.register_into(grad_reg, nullptr);
    ParamRegistry base_reg;
    gnn.register_into(base_reg, nullptr);
    push("contrastive_pipeline",
         grad_check(f, base_reg.flatten_values(), grad_reg.flatten_values(), eps));
  }

  rep.all_pass = std::all_of(rep.items.begin(), rep.items.end(),
                             [](const GradCheckReport::Item& it) { return it.pass; });
  return rep;
}

}  // namespace sequda
