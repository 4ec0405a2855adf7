// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sequda/dataset.hpp"
#include "sequda/rng.hpp"

namespace sequda {

// Global user-item interaction graph. Strictly bipartite; edge weight is
// the interaction count in the training portion only (valid/test targets
// never contribute edges). Node numbering: users 0..U-1, items U..U+I-1.
struct Guig {
  struct Edge {
    int user;
    int item;  // dense item id (not node id)
    double weight;
  };

  int n_users = 0;
  int n_items = 0;
  std::vector<Edge> edges;  // sorted by (user, item)

  // Incident edge indices per node side, neighbor lists ascending.
  std::vector<int> user_off, user_edges;  // user u: edges [user_off[u], user_off[u+1])
  std::vector<int> item_off, item_edges;

  int n_nodes() const { return n_users + n_items; }
  int item_node(int item) const { return n_users + item; }
};

Guig build_guig(const std::vector<UserSequence>& train_sequences, int n_users, int n_items);

// A stochastic subgraph of a parent Guig: a retained-edge mask plus the
// descriptor (kind, parameter, seed) that fully determines it.
struct GraphView {
  enum class Kind { Full, EdgeDropout, NeighborCap };

  const Guig* parent = nullptr;
  std::vector<std::uint8_t> keep;  // per parent edge
  Kind kind = Kind::Full;
  double param = 0.0;
  std::uint64_t seed = 0;

  std::size_t retained_count() const;
};

GraphView full_view(const Guig& g);

// Each edge retained independently with probability 1-p.
GraphView edge_dropout_view(const Guig& g, double p, Rng rng);

// Per node with degree > cap, a uniform random subset of cap incident
// edges is retained on that side; an edge survives only if retained on
// both endpoints, so the view stays a consistent bipartite subgraph.
GraphView neighbor_cap_view(const Guig& g, int cap, Rng rng);

// edges.tsv: user_id \t item_id \t weight (dense ids).
void export_edges_tsv(std::ostream& out, const Guig& g);

}  // namespace sequda
