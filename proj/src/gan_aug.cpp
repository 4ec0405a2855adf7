// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/gan_aug.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace sequda {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (auto& x : m.data) x = scale * rng.normal();
  return m;
}

struct GenCache {
  Matrix x, q, k, v;
  Matrix probs;  // len x len causal attention
  Matrix h;      // len x d, post-residual
};

// Single-head causal self-attention with residual; logits are produced
// lazily per position by the callers.
void gen_forward(const GeneratorParams& gen, const std::vector<int>& seq, GenCache& c) {
  const int len = static_cast<int>(seq.size());
  const int d = gen.d;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  c.x = Matrix(len, d);
  for (int t = 0; t < len; ++t) {
    if (seq[t] < 0 || seq[t] >= gen.n_items)
      throw std::invalid_argument("generator: item id out of range");
    for (int cc = 0; cc < d; ++cc) c.x(t, cc) = gen.emb(seq[t], cc);
  }
  c.q = matmul(c.x, gen.wq);
  c.k = matmul(c.x, gen.wk);
  c.v = matmul(c.x, gen.wv);
  c.probs = Matrix(len, len);
  c.h = c.x;
  for (int i = 0; i < len; ++i) {
    std::vector<double> s(i + 1);
    for (int j = 0; j <= i; ++j) {
      double acc = 0.0;
      for (int cc = 0; cc < d; ++cc) acc += c.q(i, cc) * c.k(j, cc);
      s[j] = acc * scale;
    }
    softmax_inplace(s);
    for (int j = 0; j <= i; ++j) {
      c.probs(i, j) = s[j];
      for (int cc = 0; cc < d; ++cc) c.h(i, cc) += s[j] * c.v(j, cc);
    }
  }
}

std::vector<double> next_item_logits(const GeneratorParams& gen, const GenCache& c, int pos) {
  std::vector<double> logits(gen.n_items);
  for (int i = 0; i < gen.n_items; ++i) {
    double acc = gen.b_out[i];
    for (int cc = 0; cc < gen.d; ++cc) acc += c.h(pos, cc) * gen.w_out(i, cc);
    logits[i] = acc;
  }
  return logits;
}

int sample_from(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

GeneratorParams GeneratorParams::init(Rng& rng, int n_items, int d) {
  GeneratorParams p;
  p.d = d;
  p.n_items = n_items;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  p.emb = random_matrix(rng, n_items, d, 0.1);
  p.wq = random_matrix(rng, d, d, s);
  p.wk = random_matrix(rng, d, d, s);
  p.wv = random_matrix(rng, d, d, s);
  p.w_out = random_matrix(rng, n_items, d, s);
  p.b_out.assign(n_items, 0.0);
  return p;
}

GeneratorParams GeneratorParams::zeros_like(const GeneratorParams& p) {
  GeneratorParams z;
  z.d = p.d;
  z.n_items = p.n_items;
  z.emb = Matrix(p.emb.rows, p.emb.cols);
  z.wq = Matrix(p.wq.rows, p.wq.cols);
  z.wk = Matrix(p.wk.rows, p.wk.cols);
  z.wv = Matrix(p.wv.rows, p.wv.cols);
  z.w_out = Matrix(p.w_out.rows, p.w_out.cols);
  z.b_out.assign(p.b_out.size(), 0.0);
  return z;
}

void GeneratorParams::register_into(ParamRegistry& reg, GeneratorParams* grads) {
  reg.add("gen.emb", emb, grads ? &grads->emb : nullptr);
  reg.add("gen.wq", wq, grads ? &grads->wq : nullptr);
  reg.add("gen.wk", wk, grads ? &grads->wk : nullptr);
  reg.add("gen.wv", wv, grads ? &grads->wv : nullptr);
  reg.add("gen.w_out", w_out, grads ? &grads->w_out : nullptr);
  reg.add("gen.b_out", b_out, grads ? &grads->b_out : nullptr);
}

DiscriminatorParams DiscriminatorParams::init(Rng& rng, int n_items, int d) {
  DiscriminatorParams p;
  p.d = d;
  p.n_items = n_items;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  p.emb = random_matrix(rng, n_items, d, 0.1);
  p.w1 = random_matrix(rng, d, d, s);
  p.b1.assign(d, 0.0);
  p.w2.assign(d, 0.0);
  Rng r = rng.child(7);
  for (auto& x : p.w2) x = s * r.normal();
  p.b2 = 0.0;
  return p;
}

DiscriminatorParams DiscriminatorParams::zeros_like(const DiscriminatorParams& p) {
  DiscriminatorParams z;
  z.d = p.d;
  z.n_items = p.n_items;
  z.emb = Matrix(p.emb.rows, p.emb.cols);
  z.w1 = Matrix(p.w1.rows, p.w1.cols);
  z.b1.assign(p.b1.size(), 0.0);
  z.w2.assign(p.w2.size(), 0.0);
  z.b2 = 0.0;
  return z;
}

void DiscriminatorParams::register_into(ParamRegistry& reg, DiscriminatorParams* grads) {
  reg.add("disc.emb", emb, grads ? &grads->emb : nullptr);
  reg.add("disc.w1", w1, grads ? &grads->w1 : nullptr);
  reg.add("disc.b1", b1, grads ? &grads->b1 : nullptr);
  reg.add("disc.w2", w2, grads ? &grads->w2 : nullptr);
  reg.add_scalar("disc.b2", b2, grads ? &grads->b2 : nullptr);
}

std::vector<std::vector<int>> generate_sequences(const GeneratorParams& gen, Rng& rng,
                                                 const std::vector<std::vector<int>>& prefixes,
                                                 int gen_len) {
  if (gen_len < 1) throw std::invalid_argument("generate_sequences: gen_len must be >= 1");
  std::vector<std::vector<int>> out;
  out.reserve(prefixes.size());
  for (const auto& prefix : prefixes) {
    if (prefix.empty()) throw std::invalid_argument("generate_sequences: empty prefix");
    std::vector<int> seq = prefix;
    for (int g = 0; g < gen_len; ++g) {
      GenCache c;
      gen_forward(gen, seq, c);
      auto logits = next_item_logits(gen, c, static_cast<int>(seq.size()) - 1);
      softmax_inplace(logits);
      seq.push_back(sample_from(logits, rng));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

namespace {

struct DiscCache {
  std::vector<double> mean, z1, a1;
  double logit = 0.0;
};

double disc_forward(const DiscriminatorParams& disc, const std::vector<int>& seq, DiscCache& c) {
  if (seq.empty()) throw std::invalid_argument("discriminate: empty sequence");
  const int d = disc.d;
  c.mean.assign(d, 0.0);
  for (int it : seq) {
    if (it < 0 || it >= disc.n_items)
      throw std::invalid_argument("discriminate: item id out of range");
    for (int cc = 0; cc < d; ++cc) c.mean[cc] += disc.emb(it, cc);
  }
  const double inv = 1.0 / static_cast<double>(seq.size());
  for (auto& x : c.mean) x *= inv;
  c.z1.assign(d, 0.0);
  vec_mat(c.mean, disc.w1, c.z1);
  for (int cc = 0; cc < d; ++cc) c.z1[cc] += disc.b1[cc];
  c.a1 = c.z1;
  for (auto& x : c.a1) x = relu(x);
  double z = disc.b2;
  for (int cc = 0; cc < d; ++cc) z += disc.w2[cc] * c.a1[cc];
  c.logit = z;
  return sigmoid(z);
}

}  // namespace

double discriminate(const DiscriminatorParams& disc, const std::vector<int>& seq) {
  DiscCache c;
  return disc_forward(disc, seq, c);
}

double discriminator_backward(const DiscriminatorParams& disc, const std::vector<int>& seq,
                              double target, DiscriminatorParams& grads, double scale) {
  DiscCache c;
  const double p = disc_forward(disc, seq, c);
  const int d = disc.d;
  const double dz2 = (p - target) * scale;
  std::vector<double> da1(d);
  for (int cc = 0; cc < d; ++cc) {
    grads.w2[cc] += dz2 * c.a1[cc];
    da1[cc] = dz2 * disc.w2[cc];
  }
  grads.b2 += dz2;
  std::vector<double> dz1(d);
  for (int cc = 0; cc < d; ++cc) dz1[cc] = c.z1[cc] > 0.0 ? da1[cc] : 0.0;
  std::vector<double> dmean(d, 0.0);
  for (int rc = 0; rc < d; ++rc) {
    for (int cc = 0; cc < d; ++cc) {
      grads.w1(rc, cc) += c.mean[rc] * dz1[cc];
      dmean[rc] += dz1[cc] * disc.w1(rc, cc);
    }
  }
  for (int cc = 0; cc < d; ++cc) grads.b1[cc] += dz1[cc];
  const double inv = 1.0 / static_cast<double>(seq.size());
  for (int it : seq)
    for (int cc = 0; cc < d; ++cc) grads.emb(it, cc) += dmean[cc] * inv;
  return bce_with_logit(c.logit, target);
}

double generator_reinforce_backward(const GeneratorParams& gen, const std::vector<int>& seq,
                                    int prefix_len, double advantage, GeneratorParams& grads,
                                    double scale) {
  const int len = static_cast<int>(seq.size());
  const int d = gen.d;
  if (prefix_len < 1 || prefix_len >= len)
    throw std::invalid_argument("generator_reinforce_backward: bad prefix_len");
  GenCache c;
  gen_forward(gen, seq, c);

  double sum_logp = 0.0;
  Matrix dh(len, d);
  const double w = advantage * scale;
  // Position j predicts seq[j+1] for j in [prefix_len-1, len-2].
  for (int j = prefix_len - 1; j < len - 1; ++j) {
    auto logits = next_item_logits(gen, c, j);
    auto probs = logits;
    softmax_inplace(probs);
    sum_logp += std::log(std::max(probs[seq[j + 1]], 1e-300));
    if (w != 0.0) {
      for (int i = 0; i < gen.n_items; ++i) {
        const double dl = w * (probs[i] - (i == seq[j + 1] ? 1.0 : 0.0));
        if (dl == 0.0) continue;
        for (int cc = 0; cc < d; ++cc) {
          grads.w_out(i, cc) += dl * c.h(j, cc);
          dh(j, cc) += dl * gen.w_out(i, cc);
        }
        grads.b_out[i] += dl;
      }
    }
  }
  if (w != 0.0) {
    // Backprop h = x + attn(x) through the single causal attention layer.
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix dx = dh;
    Matrix dq(len, d), dk(len, d), dv(len, d);
    for (int i = 0; i < len; ++i) {
      std::vector<double> dp(i + 1);
      double inner = 0.0;
      for (int j = 0; j <= i; ++j) {
        double acc = 0.0;
        for (int cc = 0; cc < d; ++cc) acc += dh(i, cc) * c.v(j, cc);
        dp[j] = acc;
        inner += acc * c.probs(i, j);
      }
      for (int j = 0; j <= i; ++j) {
        const double ds = c.probs(i, j) * (dp[j] - inner) * att_scale;
        for (int cc = 0; cc < d; ++cc) {
          dq(i, cc) += ds * c.k(j, cc);
          dk(j, cc) += ds * c.q(i, cc);
          dv(j, cc) += c.probs(i, j) * dh(i, cc);
        }
      }
    }
    auto accum = [](Matrix& dst, const Matrix& src) {
      for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    };
    accum(grads.wq, matmul(transpose(c.x), dq));
    accum(grads.wk, matmul(transpose(c.x), dk));
    accum(grads.wv, matmul(transpose(c.x), dv));
    accum(dx, matmul(dq, transpose(gen.wq)));
    accum(dx, matmul(dk, transpose(gen.wk)));
    accum(dx, matmul(dv, transpose(gen.wv)));
    for (int t = 0; t < len; ++t)
      for (int cc = 0; cc < d; ++cc) grads.emb(seq[t], cc) += dx(t, cc);
  }
  return sum_logp;
}

GanStepResult train_gan_step(const GeneratorParams& gen, const DiscriminatorParams& disc,
                             const std::vector<UserSequence>& real_batch, Rng& rng,
                             const AugmentConfig& cfg, GeneratorParams& gen_grads,
                             DiscriminatorParams& disc_grads, double& baseline) {
  if (real_batch.empty()) throw std::invalid_argument("train_gan_step: empty real batch");
  const std::size_t n = real_batch.size();

  std::vector<std::vector<int>> prefixes;
  prefixes.reserve(n);
  for (const auto& s : real_batch) {
    const int plen = std::min<int>(cfg.prefix_len, static_cast<int>(s.items.size()));
    prefixes.emplace_back(s.items.begin(), s.items.begin() + plen);
  }
  const auto fakes = generate_sequences(gen, rng, prefixes, cfg.gen_len);

  GanStepResult res;
  const double inv2n = 1.0 / static_cast<double>(2 * n);
  for (const auto& s : real_batch)
    res.disc_loss += discriminator_backward(disc, s.items, 1.0, disc_grads, inv2n) * inv2n;
  for (const auto& f : fakes)
    res.disc_loss += discriminator_backward(disc, f, 0.0, disc_grads, inv2n) * inv2n;

  const double invn = 1.0 / static_cast<double>(n);
  double mean_reward = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = discriminate(disc, fakes[i]);
    mean_reward += r * invn;
    const double adv = r - baseline;
    const int plen = static_cast<int>(prefixes[i].size());
    const double sum_logp =
        generator_reinforce_backward(gen, fakes[i], plen, adv, gen_grads, invn);
    res.gen_loss += -adv * sum_logp * invn;
  }
  res.mean_reward = mean_reward;
  baseline = cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * mean_reward;
  return res;
}

std::string AugmentAudit::to_json(const AugmentConfig& cfg) const {
  nlohmann::json j;
  j["generated"] = generated;
  j["accepted"] = accepted;
  j["mean_disc_score"] = mean_disc_score;
  j["config"] = {{"ratio", cfg.ratio},
                 {"gen_len", cfg.gen_len},
                 {"prefix_len", cfg.prefix_len},
                 {"accept_threshold", cfg.accept_threshold},
                 {"baseline_decay", cfg.baseline_decay},
                 {"gan_epochs", cfg.gan_epochs}};
  return j.dump();
}

AugmentedPool augment_pool(const std::vector<UserSequence>& real, const GeneratorParams& gen,
                           const DiscriminatorParams& disc, const AugmentConfig& cfg, Rng& rng) {
  if (real.empty()) throw std::invalid_argument("augment_pool: empty real pool");
  AugmentedPool pool;
  pool.sequences = real;
  pool.synthetic.assign(real.size(), 0);
  const auto n_gen = static_cast<std::size_t>(
      std::ceil(cfg.ratio * static_cast<double>(real.size())));
  double score_sum = 0.0;
  for (std::size_t g = 0; g < n_gen; ++g) {
    const auto src = static_cast<std::size_t>(rng.next_below(real.size()));
    const auto& seed_seq = real[src].items;
    const int plen = std::min<int>(cfg.prefix_len, static_cast<int>(seed_seq.size()));
    std::vector<std::vector<int>> prefix{{seed_seq.begin(), seed_seq.begin() + plen}};
    auto generated = generate_sequences(gen, rng, prefix, cfg.gen_len);
    const double score = discriminate(disc, generated[0]);
    score_sum += score;
    if (score >= cfg.accept_threshold) {
      pool.sequences.push_back({real[src].user, std::move(generated[0])});
      pool.synthetic.push_back(1);
      ++pool.audit.accepted;
    }
  }
  pool.audit.generated = n_gen;
  pool.audit.mean_disc_score = n_gen > 0 ? score_sum / static_cast<double>(n_gen) : 0.0;
  return pool;
}

}  // namespace sequda
