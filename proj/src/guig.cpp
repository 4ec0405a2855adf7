// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/guig.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <stdexcept>

namespace sequda {

Guig build_guig(const std::vector<UserSequence>& train_sequences, int n_users, int n_items) {
  if (train_sequences.empty()) throw std::invalid_argument("build_guig: no training sequences");
  std::map<std::pair<int, int>, double> weights;
  for (const auto& s : train_sequences) {
    if (s.user < 0 || s.user >= n_users)
      throw std::invalid_argument("build_guig: user id out of range: " + std::to_string(s.user));
    for (int it : s.items) {
      if (it < 0 || it >= n_items)
        throw std::invalid_argument("build_guig: item id out of range: " + std::to_string(it));
      weights[{s.user, it}] += 1.0;
    }
  }
  Guig g;
  g.n_users = n_users;
  g.n_items = n_items;
  g.edges.reserve(weights.size());
  for (const auto& [key, w] : weights) g.edges.push_back({key.first, key.second, w});

  g.user_off.assign(n_users + 1, 0);
  g.item_off.assign(n_items + 1, 0);
  for (const auto& e : g.edges) {
    ++g.user_off[e.user + 1];
    ++g.item_off[e.item + 1];
  }
  for (int u = 0; u < n_users; ++u) g.user_off[u + 1] += g.user_off[u];
  for (int i = 0; i < n_items; ++i) g.item_off[i + 1] += g.item_off[i];
  g.user_edges.resize(g.edges.size());
  g.item_edges.resize(g.edges.size());
  std::vector<int> ucur(g.user_off.begin(), g.user_off.end() - 1);
  std::vector<int> icur(g.item_off.begin(), g.item_off.end() - 1);
  for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
    g.user_edges[ucur[g.edges[e].user]++] = e;
    g.item_edges[icur[g.edges[e].item]++] = e;
  }
  return g;
}

std::size_t GraphView::retained_count() const {
  std::size_t n = 0;
  for (auto k : keep) n += k;
  return n;
}

GraphView full_view(const Guig& g) {
  GraphView v;
  v.parent = &g;
  v.keep.assign(g.edges.size(), 1);
  v.kind = GraphView::Kind::Full;
  return v;
}

GraphView edge_dropout_view(const Guig& g, double p, Rng rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("edge_dropout_view: p must be in [0,1)");
  GraphView v;
  v.parent = &g;
  v.kind = GraphView::Kind::EdgeDropout;
  v.param = p;
  v.seed = rng.seed();
  v.keep.resize(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e)
    v.keep[e] = rng.next_double() >= p ? 1 : 0;
  return v;
}

namespace {

// Marks a uniform random subset of `cap` entries among [off, off+deg)
// of `edge_list` in `side_keep`, or all of them when deg <= cap.
void cap_side(std::vector<std::uint8_t>& side_keep, const std::vector<int>& edge_list, int off,
              int deg, int cap, Rng& rng) {
  if (deg <= cap) {
    for (int k = 0; k < deg; ++k) side_keep[edge_list[off + k]] = 1;
    return;
  }
  std::vector<int> idx(edge_list.begin() + off, edge_list.begin() + off + deg);
  for (int k = 0; k < cap; ++k) {
    const int j = k + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(deg - k)));
    std::swap(idx[k], idx[j]);
    side_keep[idx[k]] = 1;
  }
}

}  // namespace

GraphView neighbor_cap_view(const Guig& g, int cap, Rng rng) {
  if (cap < 1) throw std::invalid_argument("neighbor_cap_view: cap must be >= 1");
  std::vector<std::uint8_t> keep_u(g.edges.size(), 0), keep_i(g.edges.size(), 0);
  for (int u = 0; u < g.n_users; ++u)
    cap_side(keep_u, g.user_edges, g.user_off[u], g.user_off[u + 1] - g.user_off[u], cap, rng);
  for (int i = 0; i < g.n_items; ++i)
    cap_side(keep_i, g.item_edges, g.item_off[i], g.item_off[i + 1] - g.item_off[i], cap, rng);
  GraphView v;
  v.parent = &g;
  v.kind = GraphView::Kind::NeighborCap;
  v.param = cap;
  v.seed = rng.seed();
  v.keep.resize(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) v.keep[e] = keep_u[e] & keep_i[e];
  return v;
}

void export_edges_tsv(std::ostream& out, const Guig& g) {
  for (const auto& e : g.edges) out << e.user << '\t' << e.item << '\t' << e.weight << '\n';
}

}  // namespace sequda
