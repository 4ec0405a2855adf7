// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sequda/dataset.hpp"
#include "sequda/gan_aug.hpp"
#include "sequda/graph_cl.hpp"
#include "sequda/guig.hpp"
#include "sequda/seq_model.hpp"

namespace sequda {

// All learnable state of a run. The registration order of
// register_values defines the checkpoint tensor order.
struct ModelBundle {
  GnnParams gnn;
  SeqEncoderParams seq;
  TargetHeadParams head;
  GeneratorParams gen;
  DiscriminatorParams disc;

  void register_values(ParamRegistry& reg);
};

struct TrainConfig {
  int epochs = 50;
  int batch = 128;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int n_neg = 100;
  bool full_softmax = false;
  double dropout = 0.0;  // accepted for forward compatibility; no-op

  int d = 64;
  int n_heads = 2;
  int n_layers = 2;
  int max_len = 50;
  int gnn_layers = 2;
  int gan_dim = 32;

  GclConfig gcl;
  AugmentConfig aug;

  std::uint64_t seed = 42;
  bool no_gcl = false;
  bool no_gan = false;
  bool no_graph_fusion = false;

  int eval_k = 10;
};

struct EpochStats {
  int epoch = 0;
  double rec_loss = 0.0;
  std::optional<double> gcl_loss;
  std::optional<double> gan_d_loss;
  std::optional<double> gan_g_loss;
  double valid_hr = 0.0;
  double valid_ndcg = 0.0;
  double valid_mrr = 0.0;
};

struct MetricsReport {
  double hr = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  int k = 10;
  int n_users = 0;
  std::uint64_t seed = 0;
  std::string config_digest;

  std::string to_json() const;
};

// Instrumented invocation counters for ablation-wiring checks.
struct ModuleCounters {
  std::size_t graph_calls = 0;  // propagate / contrastive_step invocations
  std::size_t gan_calls = 0;    // train_gan_step / augment_pool invocations
};

struct TrainOutput {
  ModelBundle model;  // best-validation-NDCG parameters, float32-rounded
  std::vector<EpochStats> history;
  ModuleCounters counters;
  AugmentAudit last_audit;
  int best_epoch = -1;
};

ModelBundle init_model(const TrainConfig& cfg, int n_users, int n_items, Rng& rng);

// Joint loop: optional GAN phase + augmentation refresh, then BCE
// recommendation loss (1 positive + sampled negatives per position) plus
// the weighted contrastive term, Adam updates, per-epoch validation.
TrainOutput train(const SplitDataset& split, const Guig& guig, const TrainConfig& cfg);

// Full-catalog leave-one-out evaluation. use_valid selects validation
// targets instead of test targets.
MetricsReport evaluate_model(const ModelBundle& model, const Guig* guig, bool use_fusion,
                             const SplitDataset& split, int k, bool use_valid = false,
                             ModuleCounters* counters = nullptr);

// 1-based rank of target under a ready-made ranking.
int rank_of(const std::vector<std::pair<int, double>>& ranking, int target);

// Popularity heuristic: items ranked by training interaction count
// (descending, ties by ascending id), identical list for every user.
MetricsReport popularity_metrics(const SplitDataset& split, int k);

struct GradCheckReport {
  struct Item {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
  };
  std::vector<Item> items;
  bool all_pass = false;
};

// Finite-difference verification of every hand-derived gradient:
// contrastive loss, recommendation BCE through the full encoder,
// discriminator BCE, target-attention/CTR head, and the contrastive
// pipeline end to end. `tamper` perturbs one analytic gradient component
// (test hook for the harness's own sensitivity).
GradCheckReport run_gradcheck(const std::string& scale, double tamper = 0.0,
                              double tolerance = 1e-4);

}  // namespace sequda
