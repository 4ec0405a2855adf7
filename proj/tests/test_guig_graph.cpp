#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "sequda/graph_cl.hpp"
#include "sequda/guig.hpp"
#include "sequda/rng.hpp"

using namespace sequda;

static Guig tiny_graph() {
  // u1:[a,b], u2:[b]
  std::vector<UserSequence> seqs{{0, {0, 1}}, {1, {1}}};
  return build_guig(seqs, 2, 2);
}

TEST_CASE("build_guig: direct construction and degrees") {
  const Guig g = tiny_graph();
  CHECK(g.n_nodes() == 4);
  REQUIRE(g.edges.size() == 3);
  CHECK(g.edges[0].user == 0);
  CHECK(g.edges[0].item == 0);
  CHECK(g.edges[0].weight == 1.0);
  CHECK(g.item_off[2] - g.item_off[1] == 2);  // item b has two user neighbors
}

TEST_CASE("build_guig: repeat interactions accumulate weight") {
  std::vector<UserSequence> seqs{{0, {0, 0, 0}}};
  const Guig g = build_guig(seqs, 1, 1);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0].weight == 3.0);
}

TEST_CASE("build_guig: empty input rejected") {
  CHECK_THROWS_AS(build_guig({}, 1, 1), std::invalid_argument);
}

TEST_CASE("views: limit cases and determinism") {
  const Guig g = tiny_graph();
  CHECK(edge_dropout_view(g, 0.0, Rng(1)).retained_count() == g.edges.size());
  CHECK(full_view(g).retained_count() == g.edges.size());
  CHECK(neighbor_cap_view(g, 10, Rng(1)).retained_count() == g.edges.size());

  const auto a = edge_dropout_view(g, 0.5, Rng(9));
  const auto b = edge_dropout_view(g, 0.5, Rng(9));
  CHECK(a.keep == b.keep);
  const auto c = neighbor_cap_view(g, 1, Rng(9));
  const auto d = neighbor_cap_view(g, 1, Rng(9));
  CHECK(c.keep == d.keep);
}

TEST_CASE("views: star node retains exactly cap edges on its side") {
  std::vector<UserSequence> seqs;
  for (int u = 0; u < 10; ++u) seqs.push_back({u, {0}});
  const Guig g = build_guig(seqs, 10, 1);
  const auto v = neighbor_cap_view(g, 3, Rng(5));
  CHECK(v.retained_count() == 3);
}

TEST_CASE("views: subsets of the parent edge set") {
  Rng r(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<UserSequence> seqs;
    for (int u = 0; u < 6; ++u) {
      UserSequence s{u, {}};
      for (int i = 0; i < 5; ++i)
        if (r.next_double() < 0.5) s.items.push_back(i);
      if (s.items.empty()) s.items.push_back(0);
      seqs.push_back(s);
    }
    const Guig g = build_guig(seqs, 6, 5);
    const auto v1 = edge_dropout_view(g, 0.4, r.child(trial));
    const auto v2 = neighbor_cap_view(g, 2, r.child(trial + 100));
    CHECK(v1.keep.size() == g.edges.size());
    CHECK(v2.keep.size() == g.edges.size());
  }
}

TEST_CASE("edge_dropout_view: retained count near binomial mean") {
  std::vector<UserSequence> seqs;
  for (int u = 0; u < 100; ++u) {
    UserSequence s{u, {}};
    for (int i = 0; i < 100; ++i) s.items.push_back(i);
    seqs.push_back(s);
  }
  const Guig g = build_guig(seqs, 100, 100);
  REQUIRE(g.edges.size() == 10000);
  for (int seed = 0; seed < 20; ++seed) {
    const auto v = edge_dropout_view(g, 0.5, Rng(seed));
    const double n = static_cast<double>(v.retained_count());
    CHECK(std::abs(n - 5000.0) < 150.0);  // 3 sigma
  }
}

static GnnParams identity_params(int n_nodes, int d, int n_layers) {
  GnnParams p;
  p.d = d;
  p.n_layers = n_layers;
  p.node_emb = Matrix(n_nodes, d);
  for (int l = 0; l < n_layers; ++l) {
    Matrix w(d, d);
    for (int i = 0; i < d; ++i) w(i, i) = 1.0;
    p.weights.push_back(w);
  }
  return p;
}

TEST_CASE("propagate: one-edge mean with identity weights") {
  std::vector<UserSequence> seqs{{0, {0}}};
  const Guig g = build_guig(seqs, 1, 1);
  GnnParams p = identity_params(2, 2, 1);
  p.node_emb(0, 0) = 1.0;  // user [1,0]
  p.node_emb(1, 1) = 1.0;  // item [0,1]
  const auto emb = propagate(full_view(g), p);
  CHECK(emb.layers[1](0, 0) == doctest::Approx(0.5));
  CHECK(emb.layers[1](0, 1) == doctest::Approx(0.5));
  CHECK(emb.layers[1](1, 0) == doctest::Approx(0.5));
  // readout = mean of layers 0 and 1
  CHECK(emb.output(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("propagate: isolated node sees only itself") {
  std::vector<UserSequence> seqs{{0, {0}}};
  const Guig g = build_guig(seqs, 2, 1);  // user 1 is isolated
  Rng r(6);
  GnnParams p = GnnParams::init(r, 3, 4, 1);
  const auto emb = propagate(full_view(g), p);
  std::vector<double> expect(4);
  vec_mat_t(p.node_emb.row_span(1), p.weights[0], expect);
  for (int c = 0; c < 4; ++c) CHECK(emb.layers[1](1, c) == doctest::Approx(expect[c]));
}

// Dense oracle: H' = sigma((D^-1 A_hat) H W^T) with self loops at weight 1.
static Matrix dense_layer(const Matrix& h, const Matrix& w, const GraphView& view,
                          bool last_layer) {
  const Guig& g = *view.parent;
  const std::size_t n = static_cast<std::size_t>(g.n_nodes());
  Matrix adj(n, n);
  for (std::size_t i = 0; i < n; ++i) adj(i, i) = 1.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!view.keep[e]) continue;
    const std::size_t u = static_cast<std::size_t>(g.edges[e].user);
    const std::size_t v = static_cast<std::size_t>(g.item_node(g.edges[e].item));
    adj(u, v) += g.edges[e].weight;
    adj(v, u) += g.edges[e].weight;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += adj(i, j);
    for (std::size_t j = 0; j < n; ++j) adj(i, j) /= deg;
  }
  Matrix out = matmul(matmul(adj, h), transpose(w));
  if (!last_layer)
    for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return out;
}

TEST_CASE("propagate: matches the dense oracle on random graphs and views") {
  Rng r(77);
  for (int trial = 0; trial < 120; ++trial) {
    const int users = 2 + static_cast<int>(r.next_below(9));
    const int items = 2 + static_cast<int>(r.next_below(9));
    std::vector<UserSequence> seqs;
    for (int u = 0; u < users; ++u) {
      UserSequence s{u, {}};
      for (int i = 0; i < items; ++i)
        if (r.next_double() < 0.4) s.items.push_back(i);
      if (!s.items.empty()) seqs.push_back(s);
    }
    if (seqs.empty()) continue;
    const Guig g = build_guig(seqs, users, items);
    const int layers = 1 + static_cast<int>(r.next_below(3));
    Rng ir = r.child(trial);
    GnnParams p = GnnParams::init(ir, g.n_nodes(), 3, layers);

    GraphView view = trial % 3 == 0 ? full_view(g)
                     : trial % 3 == 1
                         ? edge_dropout_view(g, 0.3, r.child(1000 + trial))
                         : neighbor_cap_view(g, 2, r.child(2000 + trial));
    const auto emb = propagate(view, p);

    Matrix h = p.node_emb;
    double acc_err = 0.0;
    Matrix sum = h;
    for (int l = 0; l < layers; ++l) {
      h = dense_layer(h, p.weights[l], view, l == layers - 1);
      for (std::size_t i = 0; i < h.size(); ++i) {
        sum.data[i] += h.data[i];
        acc_err = std::max(acc_err, std::abs(h.data[i] - emb.layers[l + 1].data[i]));
      }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double mean = sum.data[i] / static_cast<double>(layers + 1);
      acc_err = std::max(acc_err, std::abs(mean - emb.output.data[i]));
    }
    CHECK(acc_err < 1e-10);
  }
}

TEST_CASE("gcl_loss: batch of one is exactly zero") {
  Matrix a(3, 2), b(3, 2);
  Rng r(8);
  for (double& x : a.data) x = r.normal();
  for (double& x : b.data) x = r.normal();
  CHECK(gcl_loss(a, b, {1}, 0.2).loss == 0.0);
}

TEST_CASE("gcl_loss: uniform similarities give ln B") {
  Matrix a(4, 3), b(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) {
      a(i, c) = c == 0 ? 2.0 : 1.0;
      b(i, c) = c == 0 ? 2.0 : 1.0;
    }
  const double loss = gcl_loss(a, b, {0, 1, 2, 3}, 0.5).loss;
  CHECK(std::abs(loss - std::log(4.0)) < 1e-9);
}

TEST_CASE("gcl_loss: invariant to positive rescaling of one row") {
  Rng r(21);
  Matrix a(4, 3), b(4, 3);
  for (double& x : a.data) x = r.normal();
  for (double& x : b.data) x = r.normal();
  const double base = gcl_loss(a, b, {0, 1, 2, 3}, 0.2).loss;
  Matrix a2 = a;
  for (int c = 0; c < 3; ++c) a2(1, c) *= 5.0;
  CHECK(std::abs(gcl_loss(a2, b, {0, 1, 2, 3}, 0.2).loss - base) < 1e-9);
}

TEST_CASE("gcl_loss: lower temperature does not raise a dominant-diagonal loss") {
  Rng r(22);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a(3, 4), b(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 4; ++c) {
        a(i, c) = (i == c ? 3.0 : 0.1) + 0.05 * r.normal();
        b(i, c) = (i == c ? 3.0 : 0.1) + 0.05 * r.normal();
      }
    const double hi = gcl_loss(a, b, {0, 1, 2}, 0.5).loss;
    const double lo = gcl_loss(a, b, {0, 1, 2}, 0.1).loss;
    CHECK(lo <= hi + 1e-12);
  }
}

TEST_CASE("gcl_loss: errors") {
  Matrix a(2, 2, 1.0);
  CHECK_THROWS_AS(gcl_loss(a, a, {}, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(gcl_loss(a, a, {0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gcl_loss(a, a, {5}, 0.2), std::invalid_argument);
}

TEST_CASE("contrastive_step: deterministic given the seed") {
  const Guig g = tiny_graph();
  Rng ir(3);
  GnnParams p = GnnParams::init(ir, g.n_nodes(), 4, 2);
  GclConfig cfg;
  cfg.batch = 4;
  GnnParams g1 = GnnParams::zeros_like(p);
  GnnParams g2 = GnnParams::zeros_like(p);
  const double l1 = contrastive_step(g, p, cfg, Rng(42), g1, 1.0);
  const double l2 = contrastive_step(g, p, cfg, Rng(42), g2, 1.0);
  CHECK(l1 == l2);
  CHECK(g1.node_emb.data == g2.node_emb.data);
  for (int l = 0; l < 2; ++l) CHECK(g1.weights[l].data == g2.weights[l].data);
}

TEST_CASE("contrastive_step: scale multiplies the gradients") {
  const Guig g = tiny_graph();
  Rng ir(3);
  GnnParams p = GnnParams::init(ir, g.n_nodes(), 4, 2);
  GclConfig cfg;
  cfg.batch = 4;
  GnnParams g1 = GnnParams::zeros_like(p);
  GnnParams g2 = GnnParams::zeros_like(p);
  contrastive_step(g, p, cfg, Rng(1), g1, 1.0);
  contrastive_step(g, p, cfg, Rng(1), g2, 0.5);
  for (std::size_t i = 0; i < g1.node_emb.size(); ++i)
    CHECK(g2.node_emb.data[i] == doctest::Approx(0.5 * g1.node_emb.data[i]));
}
