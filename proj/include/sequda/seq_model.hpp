// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sequda/params.hpp"
#include "sequda/rng.hpp"
#include "sequda/tensor.hpp"

namespace sequda {

// One pre-norm Transformer block: causal multi-head self-attention and a
// position-wise feed-forward (d -> 4d -> d, ReLU), each behind its own
// layer norm and residual connection.
struct SeqLayerParams {
  Matrix wq, wk, wv, wo;        // d x d, applied as row-vector * W
  Matrix w1, w2;                // d x 4d, 4d x d
  std::vector<double> b1, b2;   // 4d, d
  std::vector<double> ln1_g, ln1_b, ln2_g, ln2_b;  // d each
};

struct SeqEncoderParams {
  int d = 0;
  int n_heads = 0;
  int n_layers = 0;
  int max_len = 0;
  int n_items = 0;
  Matrix item_emb;  // n_items x d
  Matrix pos_emb;   // max_len x d (learned)
  std::vector<SeqLayerParams> layers;
  // Graph-fusion gate on input tokens:
  //   x_t = (1-alpha)*item_emb[t] + alpha*graph_emb[t] + pos_emb[pos].
  // Clamped to [0,1] after every update; fixed at 0 when fusion is
  // ablated or no graph table is supplied.
  double alpha = 0.5;

  static SeqEncoderParams init(Rng& rng, int n_items, int d, int n_heads, int n_layers,
                               int max_len, double alpha0 = 0.5);
  static SeqEncoderParams zeros_like(const SeqEncoderParams& p);
  void register_into(ParamRegistry& reg, SeqEncoderParams* grads);
};

// Target attention (query from the candidate item) plus the CTR head
// over [attended context || candidate embedding].
struct TargetHeadParams {
  Matrix wq, wk, wv;           // d x d
  std::vector<double> ctr_w;   // 2d
  double ctr_b = 0.0;

  static TargetHeadParams init(Rng& rng, int d);
  static TargetHeadParams zeros_like(const TargetHeadParams& p);
  void register_into(ParamRegistry& reg, TargetHeadParams* grads);
};

// Item-node rows of a propagated graph embedding table, or absent.
struct GraphFusion {
  const Matrix* nodes = nullptr;  // (n_users + n_items) x d
  int n_users = 0;

  bool active() const { return nodes != nullptr; }
};

struct LayerCache {
  Matrix x_in;
  Matrix xn1;
  std::vector<double> mu1, r1;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, len x len, causal rows
  Matrix attn_concat;
  Matrix x_mid;
  Matrix xn2;
  std::vector<double> mu2, r2;
  Matrix ff_pre, ff_act;
};

struct EncodeCache {
  std::vector<int> items;
  Matrix x0;
  std::vector<LayerCache> layers;
  Matrix hidden;
};

// Fused token embedding for item `item` (no positional term).
std::vector<double> fused_item_embedding(const SeqEncoderParams& params, int item,
                                         const GraphFusion& fusion);

// Causal encoder forward. `cache`, when non-null, records everything the
// backward pass needs.
Matrix encode_sequence(const std::vector<int>& items, const SeqEncoderParams& params,
                       const GraphFusion& fusion, EncodeCache* cache = nullptr);

// Backprop through the encoder stack and the fused input embedding.
// d_hidden is the gradient w.r.t. the encoder output.
void encode_backward(const SeqEncoderParams& params, const GraphFusion& fusion,
                     const EncodeCache& cache, const Matrix& d_hidden, SeqEncoderParams& grads);

struct TargetCache {
  int len = 0;
  std::vector<double> cand;
  std::vector<double> q;
  Matrix k, v;
  std::vector<double> weights;
  std::vector<double> ctx;
  double prob = 0.0;
  double logit = 0.0;
};

// Single-head target attention over hidden[0..len), query derived from
// the candidate embedding.
std::vector<double> target_attention(const Matrix& hidden, int len,
                                     const std::vector<double>& candidate_emb,
                                     const TargetHeadParams& head, TargetCache* cache = nullptr);

// sigmoid(ctr_w . [context || candidate] + ctr_b).
double score_ctr(const std::vector<double>& context, const std::vector<double>& candidate_emb,
                 const TargetHeadParams& head);

// target_attention + score_ctr in one pass with a shared cache.
double score_candidate(const Matrix& hidden, int len, const std::vector<double>& candidate_emb,
                       const TargetHeadParams& head, TargetCache* cache = nullptr);

// Backward through score_candidate given d(loss)/d(logit). Adds into
// head grads, the hidden-state gradient (first `len` rows), and the
// candidate-embedding gradient.
void score_backward(const Matrix& hidden, const TargetHeadParams& head, const TargetCache& cache,
                    double d_logit, TargetHeadParams& head_grads, Matrix& d_hidden,
                    std::vector<double>& d_cand);

// Keys/values depend only on the hidden states, not the candidate, so
// they can be shared across the whole candidate set.
struct TargetKV {
  Matrix k, v;
};

TargetKV precompute_target_kv(const Matrix& hidden, const TargetHeadParams& head);

// score_candidate with shared keys/values; bit-identical scores.
double score_candidate_kv(const TargetKV& kv, int len, const std::vector<double>& candidate_emb,
                          const TargetHeadParams& head, TargetCache* cache = nullptr);

// Backward for the KV variant. Per-candidate gradients w.r.t. keys and
// values accumulate into dK/dV; finish_kv_backward folds them into the
// projection grads and the hidden-state gradient once per sequence.
void score_backward_kv(const TargetKV& kv, const TargetHeadParams& head, const TargetCache& cache,
                       double d_logit, TargetHeadParams& head_grads, Matrix& d_k, Matrix& d_v,
                       std::vector<double>& d_cand);

void finish_kv_backward(const Matrix& hidden, const TargetHeadParams& head, const Matrix& d_k,
                        const Matrix& d_v, TargetHeadParams& head_grads, Matrix& d_hidden);

// Scores every candidate against the encoded prefix; descending score,
// ties broken by ascending dense item id.
std::vector<std::pair<int, double>> rank_items(const std::vector<int>& prefix,
                                               const SeqEncoderParams& params,
                                               const TargetHeadParams& head,
                                               const GraphFusion& fusion,
                                               const std::vector<int>& candidates);

}  // namespace sequda
