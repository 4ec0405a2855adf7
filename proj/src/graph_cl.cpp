// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/graph_cl.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sequda {

GnnParams GnnParams::init(Rng& rng, int n_nodes, int d, int n_layers) {
  GnnParams p;
  p.d = d;
  p.n_layers = n_layers;
  p.node_emb = Matrix(n_nodes, d);
  const double emb_scale = 0.1;
  for (auto& x : p.node_emb.data) x = emb_scale * rng.normal();
  const double w_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < n_layers; ++l) {
    Matrix w(d, d);
    for (auto& x : w.data) x = w_scale * rng.normal();
    p.weights.push_back(std::move(w));
  }
  return p;
}

GnnParams GnnParams::zeros_like(const GnnParams& p) {
  GnnParams z;
  z.d = p.d;
  z.n_layers = p.n_layers;
  z.node_emb = Matrix(p.node_emb.rows, p.node_emb.cols);
  for (const auto& w : p.weights) z.weights.emplace_back(w.rows, w.cols);
  return z;
}

void GnnParams::register_into(ParamRegistry& reg, GnnParams* grads) {
  reg.add("gnn.node_emb", node_emb, grads ? &grads->node_emb : nullptr);
  for (std::size_t l = 0; l < weights.size(); ++l)
    reg.add("gnn.w" + std::to_string(l), weights[l], grads ? &grads->weights[l] : nullptr);
}

namespace {

// Per-node aggregate weight: self (1) plus kept incident edge weights.
std::vector<double> node_totals(const GraphView& view) {
  const Guig& g = *view.parent;
  std::vector<double> s(g.n_nodes(), 1.0);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!view.keep[e]) continue;
    const auto& ed = g.edges[e];
    s[ed.user] += ed.weight;
    s[g.item_node(ed.item)] += ed.weight;
  }
  return s;
}

// out = A * h with A the row-normalized self-looped adjacency.
Matrix apply_agg(const GraphView& view, const std::vector<double>& s, const Matrix& h) {
  const Guig& g = *view.parent;
  Matrix out = h;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!view.keep[e]) continue;
    const auto& ed = g.edges[e];
    const int in = g.item_node(ed.item);
    for (std::size_t c = 0; c < h.cols; ++c) {
      out(ed.user, c) += ed.weight * h(in, c);
      out(in, c) += ed.weight * h(ed.user, c);
    }
  }
  for (std::size_t n = 0; n < out.rows; ++n)
    for (std::size_t c = 0; c < out.cols; ++c) out(n, c) /= s[n];
  return out;
}

// out = A^T * grad.
Matrix apply_agg_transpose(const GraphView& view, const std::vector<double>& s,
                           const Matrix& grad) {
  const Guig& g = *view.parent;
  Matrix out(grad.rows, grad.cols);
  for (std::size_t n = 0; n < grad.rows; ++n)
    for (std::size_t c = 0; c < grad.cols; ++c) out(n, c) = grad(n, c) / s[n];
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!view.keep[e]) continue;
    const auto& ed = g.edges[e];
    const int in = g.item_node(ed.item);
    for (std::size_t c = 0; c < grad.cols; ++c) {
      out(in, c) += ed.weight / s[ed.user] * grad(ed.user, c);
      out(ed.user, c) += ed.weight / s[in] * grad(in, c);
    }
  }
  return out;
}

}  // namespace

NodeEmbeddings propagate(const GraphView& view, const GnnParams& params) {
  const Guig& g = *view.parent;
  if (static_cast<int>(params.node_emb.rows) != g.n_nodes())
    throw std::invalid_argument("propagate: embedding table rows != node count");
  const auto s = node_totals(view);
  NodeEmbeddings emb;
  emb.layers.push_back(params.node_emb);
  for (int l = 0; l < params.n_layers; ++l) {
    const Matrix agg = apply_agg(view, s, emb.layers.back());
    Matrix z = matmul(agg, transpose(params.weights[l]));
    if (l < params.n_layers - 1)
      for (auto& x : z.data) x = relu(x);
    if (!all_finite(z.data))
      throw std::runtime_error("propagate: non-finite values at layer " + std::to_string(l + 1));
    emb.layers.push_back(std::move(z));
  }
  const double inv = 1.0 / static_cast<double>(emb.layers.size());
  emb.output = Matrix(params.node_emb.rows, params.d);
  for (const auto& h : emb.layers)
    for (std::size_t i = 0; i < h.data.size(); ++i) emb.output.data[i] += h.data[i];
  for (auto& x : emb.output.data) x *= inv;
  return emb;
}

void propagate_backward(const GraphView& view, const GnnParams& params,
                        const NodeEmbeddings& emb, const Matrix& d_output, GnnParams& grads) {
  const auto s = node_totals(view);
  const int L = params.n_layers;
  const double inv = 1.0 / static_cast<double>(L + 1);
  Matrix readout = d_output;
  for (auto& x : readout.data) x *= inv;

  Matrix carried(readout.rows, readout.cols);
  for (int l = L; l >= 1; --l) {
    Matrix dh = readout;
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += carried.data[i];
    // ReLU mask for intermediate layers; last layer is identity.
    if (l < L) {
      const Matrix& hl = emb.layers[l];
      for (std::size_t i = 0; i < dh.data.size(); ++i)
        if (hl.data[i] <= 0.0) dh.data[i] = 0.0;
    }
    const Matrix agg = apply_agg(view, s, emb.layers[l - 1]);
    const Matrix dw = matmul(transpose(dh), agg);
    for (std::size_t i = 0; i < dw.data.size(); ++i) grads.weights[l - 1].data[i] += dw.data[i];
    const Matrix dagg = matmul(dh, params.weights[l - 1]);
    carried = apply_agg_transpose(view, s, dagg);
  }
  for (std::size_t i = 0; i < carried.data.size(); ++i)
    grads.node_emb.data[i] += readout.data[i] + carried.data[i];
}

GclResult gcl_loss(const Matrix& out_a, const Matrix& out_b, const std::vector<int>& batch,
                   double temperature) {
  if (batch.empty()) throw std::invalid_argument("gcl_loss: empty batch");
  if (!(temperature > 0.0)) throw std::invalid_argument("gcl_loss: temperature must be > 0");
  const int B = static_cast<int>(batch.size());
  const int N = static_cast<int>(out_a.rows);
  for (int id : batch)
    if (id < 0 || id >= N) throw std::invalid_argument("gcl_loss: batch id out of range");

  const std::size_t d = out_a.cols;
  std::vector<double> na(B), nb(B);
  for (int u = 0; u < B; ++u) {
    na[u] = norm2(out_a.row_span(batch[u]));
    nb[u] = norm2(out_b.row_span(batch[u]));
  }
  Matrix sim(B, B);
  for (int u = 0; u < B; ++u)
    for (int v = 0; v < B; ++v)
      sim(u, v) = cosine_sim(out_a.row_span(batch[u]), out_b.row_span(batch[v]));

  // Row softmax (view a anchors) and column softmax (view b anchors) of
  // sim / T.
  Matrix pa(B, B), pb(B, B);
  double loss = 0.0;
  for (int u = 0; u < B; ++u) {
    double mx = -1e300;
    for (int v = 0; v < B; ++v) mx = std::max(mx, sim(u, v) / temperature);
    double sum = 0.0;
    for (int v = 0; v < B; ++v) {
      pa(u, v) = std::exp(sim(u, v) / temperature - mx);
      sum += pa(u, v);
    }
    for (int v = 0; v < B; ++v) pa(u, v) /= sum;
    loss += -(sim(u, u) / temperature - mx) + std::log(sum);
  }
  for (int v = 0; v < B; ++v) {
    double mx = -1e300;
    for (int u = 0; u < B; ++u) mx = std::max(mx, sim(u, v) / temperature);
    double sum = 0.0;
    for (int u = 0; u < B; ++u) {
      pb(u, v) = std::exp(sim(u, v) / temperature - mx);
      sum += pb(u, v);
    }
    for (int u = 0; u < B; ++u) pb(u, v) /= sum;
    loss += -(sim(v, v) / temperature - mx) + std::log(sum);
  }
  GclResult res;
  res.loss = loss / (2.0 * B);
  res.grad_a = Matrix(out_a.rows, d);
  res.grad_b = Matrix(out_b.rows, d);

  const double coef = 1.0 / (2.0 * B * temperature);
  for (int u = 0; u < B; ++u) {
    const auto au = out_a.row_span(batch[u]);
    for (int v = 0; v < B; ++v) {
      const auto bv = out_b.row_span(batch[v]);
      double dsim = coef * (pa(u, v) + pb(u, v) - (u == v ? 2.0 : 0.0));
      if (dsim == 0.0) continue;
      if (na[u] == 0.0 || nb[v] == 0.0) continue;  // zero-norm pairs contribute no gradient
      const double inv_ab = 1.0 / (na[u] * nb[v]);
      const double s = sim(u, v);
      double* ga = res.grad_a.row(batch[u]);
      double* gb = res.grad_b.row(batch[v]);
      for (std::size_t c = 0; c < d; ++c) {
        ga[c] += dsim * (bv[c] * inv_ab - s * au[c] / (na[u] * na[u]));
        gb[c] += dsim * (au[c] * inv_ab - s * bv[c] / (nb[v] * nb[v]));
      }
    }
  }
  return res;
}

double contrastive_step(const Guig& g, const GnnParams& params, const GclConfig& cfg, Rng rng,
                        GnnParams& grads, double scale) {
  const GraphView view_a = edge_dropout_view(g, cfg.edge_dropout_p, rng.child(1));
  const GraphView view_b = neighbor_cap_view(g, cfg.neighbor_cap, rng.child(2));
  const NodeEmbeddings emb_a = propagate(view_a, params);
  const NodeEmbeddings emb_b = propagate(view_b, params);

  // Mixed user/item node batch, sampled without replacement.
  const int n = g.n_nodes();
  const int bsz = std::min(cfg.batch, n);
  Rng brng = rng.child(3);
  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  std::vector<int> batch(bsz);
  for (int k = 0; k < bsz; ++k) {
    const int j = k + static_cast<int>(brng.next_below(static_cast<std::uint64_t>(n - k)));
    std::swap(ids[k], ids[j]);
    batch[k] = ids[k];
  }

  GclResult res = gcl_loss(emb_a.output, emb_b.output, batch, cfg.temperature);
  if (scale != 1.0) {
    for (auto& x : res.grad_a.data) x *= scale;
    for (auto& x : res.grad_b.data) x *= scale;
  }
  propagate_backward(view_a, params, emb_a, res.grad_a, grads);
  propagate_backward(view_b, params, emb_b, res.grad_b, grads);
  return res.loss;
}

}  // namespace sequda
