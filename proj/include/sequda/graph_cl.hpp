// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "sequda/guig.hpp"
#include "sequda/params.hpp"
#include "sequda/rng.hpp"
#include "sequda/tensor.hpp"

namespace sequda {

// GNN parameters: base node embedding table plus one square weight
// matrix per layer. Per-layer activation is ReLU for all but the last
// layer, identity for the last (keeps the cosine geometry of the output
// expressive).
struct GnnParams {
  int d = 0;
  int n_layers = 0;
  Matrix node_emb;              // (n_users + n_items) x d
  std::vector<Matrix> weights;  // n_layers matrices, d x d

  static GnnParams init(Rng& rng, int n_nodes, int d, int n_layers);
  static GnnParams zeros_like(const GnnParams& p);
  void register_into(ParamRegistry& reg, GnnParams* grads);
};

// Per-layer embedding tables h^(0)..h^(L) plus the readout table
// (elementwise mean over layers).
struct NodeEmbeddings {
  std::vector<Matrix> layers;
  Matrix output;
};

struct GclConfig {
  double temperature = 0.2;
  int batch = 256;
  double lambda_gcl = 0.1;
  double edge_dropout_p = 0.2;
  int neighbor_cap = 32;
};

// One propagation layer per weight matrix:
//   h_u^(l+1) = sigma(W^(l) . mean over {u} union N(u) of h^(l))
// where the mean is weighted by edge multiplicity with the self term at
// weight 1. Matches the dense oracle sigma((D^-1 A_hat) H W^T) with
// self-looped weighted adjacency A_hat.
NodeEmbeddings propagate(const GraphView& view, const GnnParams& params);

// Gradient of a scalar objective back through propagate. d_output is the
// gradient w.r.t. the readout table; gradients accumulate into `grads`.
void propagate_backward(const GraphView& view, const GnnParams& params,
                        const NodeEmbeddings& emb, const Matrix& d_output, GnnParams& grads);

struct GclResult {
  double loss = 0.0;
  Matrix grad_a;  // gradient w.r.t. emb_a.output (full table, batch rows nonzero)
  Matrix grad_b;
};

// Symmetric in-batch InfoNCE over two views with cosine similarity:
// positives are the same node across views, negatives the rest of the
// batch.
GclResult gcl_loss(const Matrix& out_a, const Matrix& out_b, const std::vector<int>& batch,
                   double temperature);

// One full contrastive step: draws an edge-dropout view and a
// neighbor-cap view, propagates both, samples a mixed user/item node
// batch, and accumulates gradients through both propagations into
// `grads` scaled by `scale`.
double contrastive_step(const Guig& g, const GnnParams& params, const GclConfig& cfg, Rng rng,
                        GnnParams& grads, double scale = 1.0);

}  // namespace sequda
