#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "sequda/checkpoint.hpp"
#include "sequda/errors.hpp"
#include "sequda/gan_aug.hpp"
#include "sequda/seq_model.hpp"

using namespace sequda;

static SeqEncoderParams small_encoder(std::uint64_t seed = 2, int n_layers = 2) {
  Rng r(seed);
  return SeqEncoderParams::init(r, 12, 8, 2, n_layers, 10);
}

TEST_CASE("encode: length-1 sequence attends only to itself") {
  auto p = small_encoder();
  EncodeCache cache;
  encode_sequence({3}, p, GraphFusion{}, &cache);
  for (int l = 0; l < p.n_layers; ++l)
    for (int h = 0; h < p.n_heads; ++h) CHECK(cache.layers[l].probs[h](0, 0) == 1.0);
}

TEST_CASE("encode: attention rows are probability vectors") {
  auto p = small_encoder();
  EncodeCache cache;
  encode_sequence({0, 5, 2, 7, 1}, p, GraphFusion{}, &cache);
  for (int l = 0; l < p.n_layers; ++l)
    for (int h = 0; h < p.n_heads; ++h)
      for (int i = 0; i < 5; ++i) {
        double s = 0.0;
        for (int j = 0; j <= i; ++j) {
          CHECK(cache.layers[l].probs[h](i, j) >= 0.0);
          s += cache.layers[l].probs[h](i, j);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
}

TEST_CASE("encode: future positions never affect earlier hidden states") {
  auto p = small_encoder();
  Rng r(14);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> items(6);
    for (auto& it : items) it = static_cast<int>(r.next_below(12));
    const Matrix h1 = encode_sequence(items, p, GraphFusion{});
    std::vector<int> mod = items;
    const int j = 3 + static_cast<int>(r.next_below(3));
    mod[j] = (mod[j] + 1 + static_cast<int>(r.next_below(11))) % 12;
    const Matrix h2 = encode_sequence(mod, p, GraphFusion{});
    for (int i = 0; i < j; ++i)
      for (int c = 0; c < p.d; ++c) CHECK(h1(i, c) == h2(i, c));
  }
}

TEST_CASE("encode: errors on empty and over-long input") {
  auto p = small_encoder();
  CHECK_THROWS_AS(encode_sequence({}, p, GraphFusion{}), std::invalid_argument);
  CHECK_THROWS_AS(encode_sequence(std::vector<int>(11, 0), p, GraphFusion{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(encode_sequence({12}, p, GraphFusion{}), std::invalid_argument);
}

// Step-by-step recomputation of one pre-norm block, single head.
TEST_CASE("encode: single-layer single-head dense oracle") {
  Rng r(3);
  auto p = SeqEncoderParams::init(r, 6, 4, 1, 1, 5);
  const std::vector<int> items{1, 4, 2};
  const Matrix got = encode_sequence(items, p, GraphFusion{});

  const int d = 4, len = 3;
  Matrix x(len, d);
  for (int t = 0; t < len; ++t)
    for (int c = 0; c < d; ++c) x(t, c) = p.item_emb(items[t], c) + p.pos_emb(t, c);

  auto layer_norm = [&](const Matrix& in, const std::vector<double>& g,
                        const std::vector<double>& b) {
    Matrix out(in.rows, in.cols);
    for (std::size_t i = 0; i < in.rows; ++i) {
      double m = 0.0, var = 0.0;
      for (std::size_t c = 0; c < in.cols; ++c) m += in(i, c);
      m /= static_cast<double>(in.cols);
      for (std::size_t c = 0; c < in.cols; ++c) var += (in(i, c) - m) * (in(i, c) - m);
      var /= static_cast<double>(in.cols);
      for (std::size_t c = 0; c < in.cols; ++c)
        out(i, c) = g[c] * (in(i, c) - m) / std::sqrt(var + 1e-5) + b[c];
    }
    return out;
  };

  const auto& lp = p.layers[0];
  const Matrix xn1 = layer_norm(x, lp.ln1_g, lp.ln1_b);
  const Matrix q = matmul(xn1, lp.wq), k = matmul(xn1, lp.wk), v = matmul(xn1, lp.wv);
  Matrix attn(len, d);
  for (int i = 0; i < len; ++i) {
    std::vector<double> s(i + 1);
    for (int j = 0; j <= i; ++j) s[j] = dot(q.row_span(i), k.row_span(j)) / std::sqrt(4.0);
    auto w = softmax(s);
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int j = 0; j <= i; ++j) acc += w[j] * v(j, c);
      attn(i, c) = acc;
    }
  }
  Matrix mid = x;
  const Matrix ao = matmul(attn, lp.wo);
  for (std::size_t i = 0; i < mid.size(); ++i) mid.data[i] += ao.data[i];
  const Matrix xn2 = layer_norm(mid, lp.ln2_g, lp.ln2_b);
  Matrix ff = matmul(xn2, lp.w1);
  for (int i = 0; i < len; ++i)
    for (int c = 0; c < 4 * d; ++c) ff(i, c) = relu(ff(i, c) + lp.b1[c]);
  Matrix out = matmul(ff, lp.w2);
  for (int i = 0; i < len; ++i)
    for (int c = 0; c < d; ++c) out(i, c) += lp.b2[c] + mid(i, c);

  for (int i = 0; i < len; ++i)
    for (int c = 0; c < d; ++c) CHECK(std::abs(got(i, c) - out(i, c)) < 1e-10);
}

TEST_CASE("fusion: alpha 0 recovers the pure item embedding") {
  auto p = small_encoder();
  Matrix nodes(20, 8, 0.5);
  GraphFusion fusion{&nodes, 8};
  p.alpha = 0.0;
  const auto fe = fused_item_embedding(p, 3, fusion);
  for (int c = 0; c < 8; ++c) CHECK(fe[c] == p.item_emb(3, c));
  const Matrix with = encode_sequence({1, 2, 3}, p, fusion);
  const Matrix without = encode_sequence({1, 2, 3}, p, GraphFusion{});
  CHECK(with.data == without.data);
}

TEST_CASE("fusion: alpha blends item and graph rows") {
  auto p = small_encoder();
  Matrix nodes(20, 8, 2.0);
  GraphFusion fusion{&nodes, 8};
  p.alpha = 0.25;
  const auto fe = fused_item_embedding(p, 5, fusion);
  for (int c = 0; c < 8; ++c)
    CHECK(fe[c] == doctest::Approx(0.75 * p.item_emb(5, c) + 0.25 * 2.0));
}

TEST_CASE("target_attention: forced and symmetric cases") {
  Rng r(4);
  auto head = TargetHeadParams::init(r, 4);
  Matrix hidden(3, 4);
  for (double& x : hidden.data) x = r.normal();
  std::vector<double> cand{0.1, -0.2, 0.3, 0.4};

  SUBCASE("length 1 gives weight exactly 1") {
    TargetCache tc;
    const auto ctx = target_attention(hidden, 1, cand, head, &tc);
    CHECK(tc.weights[0] == 1.0);
    std::vector<double> expect(4);
    vec_mat(hidden.row_span(0), head.wv, expect);
    for (int c = 0; c < 4; ++c) CHECK(ctx[c] == doctest::Approx(expect[c]));
  }

  SUBCASE("identical rows make the candidate irrelevant") {
    Matrix same(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 4; ++c) same(i, c) = hidden(0, c);
    const auto c1 = target_attention(same, 3, cand, head);
    const auto c2 = target_attention(same, 3, std::vector<double>{9.0, 9.0, 9.0, 9.0}, head);
    std::vector<double> expect(4);
    vec_mat(same.row_span(0), head.wv, expect);
    for (int c = 0; c < 4; ++c) {
      CHECK(c1[c] == doctest::Approx(expect[c]));
      CHECK(c2[c] == doctest::Approx(expect[c]));
    }
  }

  SUBCASE("weights sum to 1") {
    TargetCache tc;
    target_attention(hidden, 3, cand, head, &tc);
    CHECK(std::abs(tc.weights[0] + tc.weights[1] + tc.weights[2] - 1.0) < 1e-12);
  }
}

TEST_CASE("score_ctr: anchors") {
  TargetHeadParams head;
  head.wq = Matrix(2, 2);
  head.wk = Matrix(2, 2);
  head.wv = Matrix(2, 2);
  head.ctr_w.assign(4, 0.0);
  CHECK(score_ctr({1.0, 2.0}, {3.0, 4.0}, head) == doctest::Approx(0.5));
  head.ctr_w[0] = 20.0;
  const double p = score_ctr({1.0, 0.0}, {0.0, 0.0}, head);
  CHECK(p > 0.9999);
  CHECK(std::isfinite(p));
}

TEST_CASE("rank_items: forced winner, tie rule, KV-path equivalence") {
  Rng r(5);
  auto p = small_encoder();
  auto head = TargetHeadParams::init(r, 8);
  const std::vector<int> prefix{1, 2, 3};

  const auto single = rank_items(prefix, p, head, GraphFusion{}, {7});
  REQUIRE(single.size() == 1);
  CHECK(single[0].first == 7);

  std::vector<int> all(12);
  for (int i = 0; i < 12; ++i) all[i] = i;
  const auto ranking = rank_items(prefix, p, head, GraphFusion{}, all);
  const Matrix hidden = encode_sequence(prefix, p, GraphFusion{});
  for (const auto& [item, score] : ranking) {
    std::vector<double> ce(p.item_emb.row(item), p.item_emb.row(item) + 8);
    CHECK(score == score_candidate(hidden, 3, ce, head));
  }
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    CHECK(ranking[i - 1].second >= ranking[i].second);
    if (ranking[i - 1].second == ranking[i].second)
      CHECK(ranking[i - 1].first < ranking[i].first);
  }
}

TEST_CASE("rank_items: bit-identical score ties order by ascending id") {
  // Zero head weights collapse every score to 0.5.
  auto p = small_encoder();
  Rng r(1);
  TargetHeadParams head = TargetHeadParams::zeros_like(TargetHeadParams::init(r, 8));
  const auto ranking = rank_items({1, 2}, p, head, GraphFusion{}, {5, 3, 9});
  CHECK(ranking[0].first == 3);
  CHECK(ranking[1].first == 5);
  CHECK(ranking[2].first == 9);
}

TEST_CASE("generator: determinism and concentration") {
  Rng r(6);
  auto gen = GeneratorParams::init(r, 10, 8);
  Rng s1(9), s2(9);
  const auto a = generate_sequences(gen, s1, {{1, 2}, {3}}, 5);
  const auto b = generate_sequences(gen, s2, {{1, 2}, {3}}, 5);
  CHECK(a == b);
  REQUIRE(a.size() == 2);
  CHECK(a[0].size() == 7);
  CHECK(a[0][0] == 1);
  CHECK(a[1][0] == 3);
}

TEST_CASE("generator: uniform logits sample uniformly") {
  GeneratorParams gen;
  gen.d = 4;
  gen.n_items = 10;
  gen.emb = Matrix(10, 4);
  gen.wq = Matrix(4, 4);
  gen.wk = Matrix(4, 4);
  gen.wv = Matrix(4, 4);
  gen.w_out = Matrix(10, 4);
  gen.b_out.assign(10, 0.0);
  Rng r(30);
  std::vector<int> count(10, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto seq = generate_sequences(gen, r, {{0}}, 1);
    count[static_cast<std::size_t>(seq[0][1])]++;
  }
  for (int c : count) CHECK(std::abs(c / 10000.0 - 0.1) < 0.01);
}

TEST_CASE("generator: a dominant logit forces the sample") {
  GeneratorParams gen;
  gen.d = 2;
  gen.n_items = 5;
  gen.emb = Matrix(5, 2);
  gen.wq = Matrix(2, 2);
  gen.wk = Matrix(2, 2);
  gen.wv = Matrix(2, 2);
  gen.w_out = Matrix(5, 2);
  gen.b_out.assign(5, 0.0);
  gen.b_out[3] = 1000.0;
  Rng r(1);
  for (int t = 0; t < 20; ++t) {
    const auto seq = generate_sequences(gen, r, {{0}}, 3);
    for (std::size_t i = 1; i < seq[0].size(); ++i) CHECK(seq[0][i] == 3);
  }
}

TEST_CASE("discriminator: 0.5 at zero weights and order-blind") {
  DiscriminatorParams disc;
  disc.d = 4;
  disc.n_items = 6;
  disc.emb = Matrix(6, 4);
  disc.w1 = Matrix(4, 4);
  disc.b1.assign(4, 0.0);
  disc.w2.assign(4, 0.0);
  CHECK(discriminate(disc, {1, 2}) == doctest::Approx(0.5));

  Rng r(11);
  auto d2 = DiscriminatorParams::init(r, 6, 4);
  CHECK(discriminate(d2, {1, 2, 3}) == discriminate(d2, {3, 1, 2}));
  CHECK_THROWS_AS(discriminate(d2, {}), std::invalid_argument);
}

TEST_CASE("reinforce: constant reward gives exactly zero gradient") {
  Rng r(12);
  auto gen = GeneratorParams::init(r, 8, 4);
  auto grads = GeneratorParams::zeros_like(gen);
  generator_reinforce_backward(gen, {1, 2, 3, 4, 5}, 3, 0.0, grads, 1.0);
  for (double g : grads.emb.data) CHECK(g == 0.0);
  for (double g : grads.w_out.data) CHECK(g == 0.0);
  for (double g : grads.wq.data) CHECK(g == 0.0);
  for (double g : grads.b_out) CHECK(g == 0.0);
}

TEST_CASE("train_gan_step: deterministic and lowers disc loss on a toy task") {
  Rng ir(13);
  auto gen = GeneratorParams::init(ir, 6, 4);
  auto disc = DiscriminatorParams::init(ir, 6, 4);
  std::vector<UserSequence> real{{0, {1, 1, 1, 1}}, {1, {2, 2, 2, 2}}};
  AugmentConfig cfg;
  cfg.prefix_len = 2;
  cfg.gen_len = 2;

  auto gg1 = GeneratorParams::zeros_like(gen);
  auto dg1 = DiscriminatorParams::zeros_like(disc);
  auto gg2 = GeneratorParams::zeros_like(gen);
  auto dg2 = DiscriminatorParams::zeros_like(disc);
  double base1 = 0.5, base2 = 0.5;
  Rng r1(21), r2(21);
  const auto s1 = train_gan_step(gen, disc, real, r1, cfg, gg1, dg1, base1);
  const auto s2 = train_gan_step(gen, disc, real, r2, cfg, gg2, dg2, base2);
  CHECK(s1.disc_loss == s2.disc_loss);
  CHECK(s1.gen_loss == s2.gen_loss);
  CHECK(base1 == base2);
  CHECK(dg1.emb.data == dg2.emb.data);

  // One SGD step against the recorded gradients should not raise the
  // discriminator's loss on the same batch (averaged over seeds).
  int improved = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng ir2(100 + seed);
    auto g = GeneratorParams::init(ir2, 6, 4);
    auto dsc = DiscriminatorParams::init(ir2, 6, 4);
    auto gg = GeneratorParams::zeros_like(g);
    auto dg = DiscriminatorParams::zeros_like(dsc);
    double base = 0.5;
    Rng step_rng(seed);
    Rng replay_rng(seed);
    const auto before = train_gan_step(g, dsc, real, step_rng, cfg, gg, dg, base);
    ParamRegistry reg;
    dsc.register_into(reg, &dg);
    for (const auto& e : reg.entries())
      for (std::size_t i = 0; i < e.n; ++i) e.value[i] -= 0.01 * e.grad[i];
    auto gg3 = GeneratorParams::zeros_like(g);
    auto dg3 = DiscriminatorParams::zeros_like(dsc);
    double base3 = 0.5;
    const auto after = train_gan_step(g, dsc, real, replay_rng, cfg, gg3, dg3, base3);
    if (after.disc_loss <= before.disc_loss) improved++;
  }
  CHECK(improved >= 15);
}

TEST_CASE("augment_pool: ratio 0 is the identity") {
  Rng ir(14);
  auto gen = GeneratorParams::init(ir, 6, 4);
  auto disc = DiscriminatorParams::init(ir, 6, 4);
  std::vector<UserSequence> real{{0, {1, 2, 3}}, {1, {4, 5, 1}}};
  AugmentConfig cfg;
  cfg.ratio = 0.0;
  Rng r(2);
  const auto pool = augment_pool(real, gen, disc, cfg, r);
  CHECK(pool.sequences.size() == 2);
  CHECK(pool.audit.generated == 0);
  CHECK(pool.audit.accepted == 0);
}

TEST_CASE("augment_pool: zero threshold accepts every candidate") {
  Rng ir(15);
  auto gen = GeneratorParams::init(ir, 6, 4);
  auto disc = DiscriminatorParams::init(ir, 6, 4);
  std::vector<UserSequence> real{{0, {1, 2, 3}}, {1, {4, 5, 1}}, {2, {2, 2, 2}}};
  AugmentConfig cfg;
  cfg.ratio = 0.5;
  cfg.accept_threshold = 0.0;
  Rng r(3);
  const auto pool = augment_pool(real, gen, disc, cfg, r);
  CHECK(pool.audit.generated == 2);  // ceil(0.5 * 3)
  CHECK(pool.audit.accepted == 2);
  CHECK(pool.sequences.size() == 5);
  CHECK(pool.synthetic[2] == 0);
  CHECK(pool.synthetic[3] == 1);
  CHECK(pool.synthetic[4] == 1);
}

TEST_CASE("checkpoint: save/load round trip and validation") {
  const std::string dir =
      (std::filesystem::temp_directory_path() / "sequda_ckpt_test").string();
  std::filesystem::remove_all(dir);

  Rng r(16);
  Matrix w = Matrix(3, 2);
  for (double& x : w.data) x = r.normal();
  std::vector<double> b{1.0, -2.0, 0.25};
  ParamRegistry reg;
  reg.add("w", w, nullptr);
  reg.add("b", b, nullptr);
  round_to_f32(reg);
  const Matrix w_saved = w;

  CheckpointMeta meta;
  meta.config_json = "{}";
  meta.config_digest = "d";
  meta.vocab_digest = "v";
  save_checkpoint(dir, reg, meta);

  Matrix w2(3, 2);
  std::vector<double> b2(3, 0.0);
  ParamRegistry reg2;
  reg2.add("w", w2, nullptr);
  reg2.add("b", b2, nullptr);
  const auto loaded = load_checkpoint(dir, reg2);
  CHECK(loaded.vocab_digest == "v");
  CHECK(w2.data == w_saved.data);
  CHECK(b2 == b);

  SUBCASE("shape mismatch is rejected") {
    Matrix bad(2, 3);
    std::vector<double> b3(3, 0.0);
    ParamRegistry reg3;
    reg3.add("w", bad, nullptr);
    reg3.add("b", b3, nullptr);
    CHECK_THROWS_AS(load_checkpoint(dir, reg3), SchemaError);
  }
  SUBCASE("name mismatch is rejected") {
    Matrix w3(3, 2);
    std::vector<double> b3(3, 0.0);
    ParamRegistry reg3;
    reg3.add("x", w3, nullptr);
    reg3.add("b", b3, nullptr);
    CHECK_THROWS_AS(load_checkpoint(dir, reg3), SchemaError);
  }
  std::filesystem::remove_all(dir);
}
