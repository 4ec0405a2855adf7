// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/seq_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sequda {

namespace {

constexpr double kLnEps = 1e-5;

void ln_forward(const Matrix& x, const std::vector<double>& g, const std::vector<double>& b,
                Matrix& out, std::vector<double>& mu, std::vector<double>& r) {
  const std::size_t d = x.cols;
  out = Matrix(x.rows, d);
  mu.assign(x.rows, 0.0);
  r.assign(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double m = 0.0;
    for (std::size_t c = 0; c < d; ++c) m += x(i, c);
    m /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = x(i, c) - m;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    mu[i] = m;
    r[i] = rs;
    for (std::size_t c = 0; c < d; ++c) out(i, c) = g[c] * (x(i, c) - m) * rs + b[c];
  }
}

void ln_backward(const Matrix& x, const std::vector<double>& mu, const std::vector<double>& r,
                 const std::vector<double>& g, const Matrix& d_out, Matrix& dx_accum,
                 std::vector<double>& dg, std::vector<double>& db) {
  const std::size_t d = x.cols;
  for (std::size_t i = 0; i < x.rows; ++i) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (x(i, c) - mu[i]) * r[i];
      const double dxh = d_out(i, c) * g[c];
      dg[c] += d_out(i, c) * xh;
      db[c] += d_out(i, c);
      m1 += dxh;
      m2 += dxh * xh;
    }
    m1 /= static_cast<double>(d);
    m2 /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      const double xh = (x(i, c) - mu[i]) * r[i];
      const double dxh = d_out(i, c) * g[c];
      dx_accum(i, c) += r[i] * (dxh - m1 - xh * m2);
    }
  }
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void col_sums_into(std::vector<double>& dst, const Matrix& src) {
  for (std::size_t i = 0; i < src.rows; ++i)
    for (std::size_t c = 0; c < src.cols; ++c) dst[c] += src(i, c);
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Matrix m(rows, cols);
  for (auto& x : m.data) x = scale * rng.normal();
  return m;
}

}  // namespace

SeqEncoderParams SeqEncoderParams::init(Rng& rng, int n_items, int d, int n_heads, int n_layers,
                                        int max_len, double alpha0) {
  if (d % n_heads != 0)
    throw std::invalid_argument("SeqEncoderParams: d must be divisible by n_heads");
  SeqEncoderParams p;
  p.d = d;
  p.n_heads = n_heads;
  p.n_layers = n_layers;
  p.max_len = max_len;
  p.n_items = n_items;
  p.alpha = alpha0;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  p.item_emb = random_matrix(rng, n_items, d, 0.1);
  p.pos_emb = random_matrix(rng, max_len, d, 0.1);
  for (int l = 0; l < n_layers; ++l) {
    SeqLayerParams lp;
    lp.wq = random_matrix(rng, d, d, s);
    lp.wk = random_matrix(rng, d, d, s);
    lp.wv = random_matrix(rng, d, d, s);
    lp.wo = random_matrix(rng, d, d, s);
    lp.w1 = random_matrix(rng, d, 4 * d, s);
    lp.w2 = random_matrix(rng, 4 * d, d, 0.5 * s);
    lp.b1.assign(4 * d, 0.0);
    lp.b2.assign(d, 0.0);
    lp.ln1_g.assign(d, 1.0);
    lp.ln1_b.assign(d, 0.0);
    lp.ln2_g.assign(d, 1.0);
    lp.ln2_b.assign(d, 0.0);
    p.layers.push_back(std::move(lp));
  }
  return p;
}

SeqEncoderParams SeqEncoderParams::zeros_like(const SeqEncoderParams& p) {
  SeqEncoderParams z;
  z.d = p.d;
  z.n_heads = p.n_heads;
  z.n_layers = p.n_layers;
  z.max_len = p.max_len;
  z.n_items = p.n_items;
  z.alpha = 0.0;
  z.item_emb = Matrix(p.item_emb.rows, p.item_emb.cols);
  z.pos_emb = Matrix(p.pos_emb.rows, p.pos_emb.cols);
  for (const auto& lp : p.layers) {
    SeqLayerParams zl;
    zl.wq = Matrix(lp.wq.rows, lp.wq.cols);
    zl.wk = Matrix(lp.wk.rows, lp.wk.cols);
    zl.wv = Matrix(lp.wv.rows, lp.wv.cols);
    zl.wo = Matrix(lp.wo.rows, lp.wo.cols);
    zl.w1 = Matrix(lp.w1.rows, lp.w1.cols);
    zl.w2 = Matrix(lp.w2.rows, lp.w2.cols);
    zl.b1.assign(lp.b1.size(), 0.0);
    zl.b2.assign(lp.b2.size(), 0.0);
    zl.ln1_g.assign(lp.ln1_g.size(), 0.0);
    zl.ln1_b.assign(lp.ln1_b.size(), 0.0);
    zl.ln2_g.assign(lp.ln2_g.size(), 0.0);
    zl.ln2_b.assign(lp.ln2_b.size(), 0.0);
    z.layers.push_back(std::move(zl));
  }
  return z;
}

void SeqEncoderParams::register_into(ParamRegistry& reg, SeqEncoderParams* grads) {
  reg.add("seq.item_emb", item_emb, grads ? &grads->item_emb : nullptr);
  reg.add("seq.pos_emb", pos_emb, grads ? &grads->pos_emb : nullptr);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& lp = layers[l];
    SeqLayerParams* gl = grads ? &grads->layers[l] : nullptr;
    const std::string pre = "seq.l" + std::to_string(l) + ".";
    reg.add(pre + "wq", lp.wq, gl ? &gl->wq : nullptr);
    reg.add(pre + "wk", lp.wk, gl ? &gl->wk : nullptr);
    reg.add(pre + "wv", lp.wv, gl ? &gl->wv : nullptr);
    reg.add(pre + "wo", lp.wo, gl ? &gl->wo : nullptr);
    reg.add(pre + "w1", lp.w1, gl ? &gl->w1 : nullptr);
    reg.add(pre + "b1", lp.b1, gl ? &gl->b1 : nullptr);
    reg.add(pre + "w2", lp.w2, gl ? &gl->w2 : nullptr);
    reg.add(pre + "b2", lp.b2, gl ? &gl->b2 : nullptr);
    reg.add(pre + "ln1_g", lp.ln1_g, gl ? &gl->ln1_g : nullptr);
    reg.add(pre + "ln1_b", lp.ln1_b, gl ? &gl->ln1_b : nullptr);
    reg.add(pre + "ln2_g", lp.ln2_g, gl ? &gl->ln2_g : nullptr);
    reg.add(pre + "ln2_b", lp.ln2_b, gl ? &gl->ln2_b : nullptr);
  }
  reg.add_scalar("seq.alpha", alpha, grads ? &grads->alpha : nullptr);
}

TargetHeadParams TargetHeadParams::init(Rng& rng, int d) {
  TargetHeadParams h;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  h.wq = random_matrix(rng, d, d, s);
  h.wk = random_matrix(rng, d, d, s);
  h.wv = random_matrix(rng, d, d, s);
  h.ctr_w.assign(2 * d, 0.0);
  Rng r = rng.child(17);
  for (auto& x : h.ctr_w) x = s * r.normal();
  h.ctr_b = 0.0;
  return h;
}

TargetHeadParams TargetHeadParams::zeros_like(const TargetHeadParams& p) {
  TargetHeadParams z;
  z.wq = Matrix(p.wq.rows, p.wq.cols);
  z.wk = Matrix(p.wk.rows, p.wk.cols);
  z.wv = Matrix(p.wv.rows, p.wv.cols);
  z.ctr_w.assign(p.ctr_w.size(), 0.0);
  z.ctr_b = 0.0;
  return z;
}

void TargetHeadParams::register_into(ParamRegistry& reg, TargetHeadParams* grads) {
  reg.add("head.wq", wq, grads ? &grads->wq : nullptr);
  reg.add("head.wk", wk, grads ? &grads->wk : nullptr);
  reg.add("head.wv", wv, grads ? &grads->wv : nullptr);
  reg.add("head.ctr_w", ctr_w, grads ? &grads->ctr_w : nullptr);
  reg.add_scalar("head.ctr_b", ctr_b, grads ? &grads->ctr_b : nullptr);
}

std::vector<double> fused_item_embedding(const SeqEncoderParams& params, int item,
                                         const GraphFusion& fusion) {
  if (item < 0 || item >= params.n_items)
    throw std::invalid_argument("fused_item_embedding: item id out of range: " +
                                std::to_string(item));
  std::vector<double> out(params.d);
  const double a = fusion.active() ? params.alpha : 0.0;
  const double* ie = params.item_emb.row(item);
  for (int c = 0; c < params.d; ++c) out[c] = (1.0 - a) * ie[c];
  if (fusion.active()) {
    const double* ge = fusion.nodes->row(fusion.n_users + item);
    for (int c = 0; c < params.d; ++c) out[c] += a * ge[c];
  }
  return out;
}

Matrix encode_sequence(const std::vector<int>& items, const SeqEncoderParams& params,
                       const GraphFusion& fusion, EncodeCache* cache) {
  const int len = static_cast<int>(items.size());
  if (len == 0) throw std::invalid_argument("encode_sequence: empty sequence");
  if (len > params.max_len)
    throw std::invalid_argument("encode_sequence: length " + std::to_string(len) +
                                " exceeds max_len " + std::to_string(params.max_len));
  const int d = params.d;
  const int H = params.n_heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x(len, d);
  for (int t = 0; t < len; ++t) {
    const auto fe = fused_item_embedding(params, items[t], fusion);
    for (int c = 0; c < d; ++c) x(t, c) = fe[c] + params.pos_emb(t, c);
  }
  if (cache) {
    cache->items = items;
    cache->x0 = x;
    cache->layers.clear();
  }

  for (const auto& lp : params.layers) {
    LayerCache lc;
    lc.x_in = x;
    ln_forward(x, lp.ln1_g, lp.ln1_b, lc.xn1, lc.mu1, lc.r1);
    lc.q = matmul(lc.xn1, lp.wq);
    lc.k = matmul(lc.xn1, lp.wk);
    lc.v = matmul(lc.xn1, lp.wv);
    lc.attn_concat = Matrix(len, d);
    lc.probs.assign(H, Matrix(len, len));
    for (int h = 0; h < H; ++h) {
      const int c0 = h * dh;
      Matrix& p = lc.probs[h];
      for (int i = 0; i < len; ++i) {
        // Causal: position i attends to positions <= i.
        std::vector<double> s(i + 1);
        for (int j = 0; j <= i; ++j) {
          double acc = 0.0;
          for (int c = 0; c < dh; ++c) acc += lc.q(i, c0 + c) * lc.k(j, c0 + c);
          s[j] = acc * scale;
        }
        softmax_inplace(s);
        for (int j = 0; j <= i; ++j) p(i, j) = s[j];
        for (int c = 0; c < dh; ++c) {
          double acc = 0.0;
          for (int j = 0; j <= i; ++j) acc += p(i, j) * lc.v(j, c0 + c);
          lc.attn_concat(i, c0 + c) = acc;
        }
      }
    }
    const Matrix attn_out = matmul(lc.attn_concat, lp.wo);
    lc.x_mid = lc.x_in;
    add_into(lc.x_mid, attn_out);

    ln_forward(lc.x_mid, lp.ln2_g, lp.ln2_b, lc.xn2, lc.mu2, lc.r2);
    lc.ff_pre = matmul(lc.xn2, lp.w1);
    for (int i = 0; i < len; ++i)
      for (int c = 0; c < 4 * d; ++c) lc.ff_pre(i, c) += lp.b1[c];
    lc.ff_act = lc.ff_pre;
    for (auto& v : lc.ff_act.data) v = relu(v);
    Matrix ff_out = matmul(lc.ff_act, lp.w2);
    for (int i = 0; i < len; ++i)
      for (int c = 0; c < d; ++c) ff_out(i, c) += lp.b2[c];
    x = lc.x_mid;
    add_into(x, ff_out);
    if (cache) cache->layers.push_back(std::move(lc));
  }
  check_finite(x, "encoder hidden states");
  if (cache) cache->hidden = x;
  return x;
}

void encode_backward(const SeqEncoderParams& params, const GraphFusion& fusion,
                     const EncodeCache& cache, const Matrix& d_hidden, SeqEncoderParams& grads) {
  const int len = static_cast<int>(cache.items.size());
  const int d = params.d;
  const int H = params.n_heads;
  const int dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx = d_hidden;
  for (int l = params.n_layers - 1; l >= 0; --l) {
    const auto& lp = params.layers[l];
    auto& gl = grads.layers[l];
    const auto& lc = cache.layers[l];

    // Feed-forward sublayer (residual passes dx straight through).
    const Matrix& d_ffout = dx;
    Matrix d_ffact = matmul(d_ffout, transpose(lp.w2));
    add_into(gl.w2, matmul(transpose(lc.ff_act), d_ffout));
    col_sums_into(gl.b2, d_ffout);
    for (std::size_t i = 0; i < d_ffact.data.size(); ++i)
      if (lc.ff_pre.data[i] <= 0.0) d_ffact.data[i] = 0.0;
    add_into(gl.w1, matmul(transpose(lc.xn2), d_ffact));
    col_sums_into(gl.b1, d_ffact);
    const Matrix d_xn2 = matmul(d_ffact, transpose(lp.w1));
    Matrix d_mid = dx;
    ln_backward(lc.x_mid, lc.mu2, lc.r2, lp.ln2_g, d_xn2, d_mid, gl.ln2_g, gl.ln2_b);

    // Attention sublayer.
    const Matrix& d_attnout = d_mid;
    Matrix d_concat = matmul(d_attnout, transpose(lp.wo));
    add_into(gl.wo, matmul(transpose(lc.attn_concat), d_attnout));
    Matrix dq(len, d), dk(len, d), dv(len, d);
    for (int h = 0; h < H; ++h) {
      const int c0 = h * dh;
      const Matrix& p = lc.probs[h];
      for (int i = 0; i < len; ++i) {
        std::vector<double> dp(i + 1);
        double inner = 0.0;
        for (int j = 0; j <= i; ++j) {
          double acc = 0.0;
          for (int c = 0; c < dh; ++c) acc += d_concat(i, c0 + c) * lc.v(j, c0 + c);
          dp[j] = acc;
          inner += acc * p(i, j);
        }
        for (int j = 0; j <= i; ++j) {
          const double ds = p(i, j) * (dp[j] - inner) * scale;
          for (int c = 0; c < dh; ++c) {
            dq(i, c0 + c) += ds * lc.k(j, c0 + c);
            dk(j, c0 + c) += ds * lc.q(i, c0 + c);
            dv(j, c0 + c) += p(i, j) * d_concat(i, c0 + c);
          }
        }
      }
    }
    add_into(gl.wq, matmul(transpose(lc.xn1), dq));
    add_into(gl.wk, matmul(transpose(lc.xn1), dk));
    add_into(gl.wv, matmul(transpose(lc.xn1), dv));
    Matrix d_xn1 = matmul(dq, transpose(lp.wq));
    add_into(d_xn1, matmul(dk, transpose(lp.wk)));
    add_into(d_xn1, matmul(dv, transpose(lp.wv)));
    Matrix d_in = d_mid;
    ln_backward(lc.x_in, lc.mu1, lc.r1, lp.ln1_g, d_xn1, d_in, gl.ln1_g, gl.ln1_b);
    dx = std::move(d_in);
  }

  // Input embedding: x_t = (1-a)*item + a*graph + pos.
  const double a = fusion.active() ? params.alpha : 0.0;
  for (int t = 0; t < len; ++t) {
    const int item = cache.items[t];
    const double* ie = params.item_emb.row(item);
    const double* ge = fusion.active() ? fusion.nodes->row(fusion.n_users + item) : nullptr;
    for (int c = 0; c < d; ++c) {
      const double g = dx(t, c);
      grads.pos_emb(t, c) += g;
      grads.item_emb(item, c) += (1.0 - a) * g;
      if (fusion.active()) grads.alpha += g * (ge[c] - ie[c]);
    }
  }
}

std::vector<double> target_attention(const Matrix& hidden, int len,
                                     const std::vector<double>& candidate_emb,
                                     const TargetHeadParams& head, TargetCache* cache) {
  if (len < 1 || static_cast<std::size_t>(len) > hidden.rows)
    throw std::invalid_argument("target_attention: invalid length");
  const std::size_t d = hidden.cols;
  if (candidate_emb.size() != d || head.wq.rows != d)
    throw std::invalid_argument("target_attention: shape mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> q(d);
  vec_mat(candidate_emb, head.wq, q);
  Matrix k(len, d), v(len, d);
  std::vector<double> s(len);
  for (int i = 0; i < len; ++i) {
    vec_mat(hidden.row_span(i), head.wk, k.row_span(i));
    vec_mat(hidden.row_span(i), head.wv, v.row_span(i));
    s[i] = dot(q, k.row_span(i)) * scale;
  }
  softmax_inplace(s);
  std::vector<double> ctx(d, 0.0);
  for (int i = 0; i < len; ++i)
    for (std::size_t c = 0; c < d; ++c) ctx[c] += s[i] * v(i, c);
  if (cache) {
    cache->len = len;
    cache->cand = candidate_emb;
    cache->q = q;
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->weights = s;
    cache->ctx = ctx;
  }
  return ctx;
}

double score_ctr(const std::vector<double>& context, const std::vector<double>& candidate_emb,
                 const TargetHeadParams& head) {
  const std::size_t d = context.size();
  if (candidate_emb.size() != d || head.ctr_w.size() != 2 * d)
    throw std::invalid_argument("score_ctr: shape mismatch");
  double z = head.ctr_b;
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[c] * context[c];
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[d + c] * candidate_emb[c];
  return sigmoid(z);
}

double score_candidate(const Matrix& hidden, int len, const std::vector<double>& candidate_emb,
                       const TargetHeadParams& head, TargetCache* cache) {
  TargetCache local;
  TargetCache& tc = cache ? *cache : local;
  const auto ctx = target_attention(hidden, len, candidate_emb, head, &tc);
  const std::size_t d = ctx.size();
  double z = head.ctr_b;
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[c] * ctx[c];
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[d + c] * candidate_emb[c];
  tc.logit = z;
  tc.prob = sigmoid(z);
  return tc.prob;
}

void score_backward(const Matrix& hidden, const TargetHeadParams& head, const TargetCache& cache,
                    double d_logit, TargetHeadParams& head_grads, Matrix& d_hidden,
                    std::vector<double>& d_cand) {
  const std::size_t d = hidden.cols;
  const int len = cache.len;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> d_ctx(d);
  for (std::size_t c = 0; c < d; ++c) {
    head_grads.ctr_w[c] += d_logit * cache.ctx[c];
    head_grads.ctr_w[d + c] += d_logit * cache.cand[c];
    d_ctx[c] = d_logit * head.ctr_w[c];
    d_cand[c] += d_logit * head.ctr_w[d + c];
  }
  head_grads.ctr_b += d_logit;

  // ctx = sum_i w_i v_i
  std::vector<double> dw(len);
  double inner = 0.0;
  for (int i = 0; i < len; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += d_ctx[c] * cache.v(i, c);
    dw[i] = acc;
    inner += acc * cache.weights[i];
  }
  std::vector<double> dq(d, 0.0);
  std::vector<double> dk_row(d), dv_row(d);
  for (int i = 0; i < len; ++i) {
    const double ds = cache.weights[i] * (dw[i] - inner) * scale;
    for (std::size_t c = 0; c < d; ++c) {
      dq[c] += ds * cache.k(i, c);
      dk_row[c] = ds * cache.q[c];
      dv_row[c] = cache.weights[i] * d_ctx[c];
    }
    // dWk += h_i^T dk ; dWv += h_i^T dv ; dh_i += dk Wk^T + dv Wv^T
    const auto hi = hidden.row_span(i);
    for (std::size_t rc = 0; rc < d; ++rc)
      for (std::size_t cc = 0; cc < d; ++cc) {
        head_grads.wk(rc, cc) += hi[rc] * dk_row[cc];
        head_grads.wv(rc, cc) += hi[rc] * dv_row[cc];
      }
    for (std::size_t rc = 0; rc < d; ++rc) {
      double acc = 0.0;
      for (std::size_t cc = 0; cc < d; ++cc)
        acc += dk_row[cc] * head.wk(rc, cc) + dv_row[cc] * head.wv(rc, cc);
      d_hidden(i, rc) += acc;
    }
  }
  // q = cand Wq
  for (std::size_t rc = 0; rc < d; ++rc) {
    double acc = 0.0;
    for (std::size_t cc = 0; cc < d; ++cc) {
      head_grads.wq(rc, cc) += cache.cand[rc] * dq[cc];
      acc += dq[cc] * head.wq(rc, cc);
    }
    d_cand[rc] += acc;
  }
}

TargetKV precompute_target_kv(const Matrix& hidden, const TargetHeadParams& head) {
  const std::size_t d = hidden.cols;
  TargetKV kv;
  kv.k = Matrix(hidden.rows, d);
  kv.v = Matrix(hidden.rows, d);
  for (std::size_t i = 0; i < hidden.rows; ++i) {
    vec_mat(hidden.row_span(i), head.wk, kv.k.row_span(i));
    vec_mat(hidden.row_span(i), head.wv, kv.v.row_span(i));
  }
  return kv;
}

double score_candidate_kv(const TargetKV& kv, int len, const std::vector<double>& candidate_emb,
                          const TargetHeadParams& head, TargetCache* cache) {
  if (len < 1 || static_cast<std::size_t>(len) > kv.k.rows)
    throw std::invalid_argument("score_candidate_kv: invalid length");
  const std::size_t d = kv.k.cols;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> q(d);
  vec_mat(candidate_emb, head.wq, q);
  std::vector<double> s(len);
  for (int i = 0; i < len; ++i) s[i] = dot(q, kv.k.row_span(i)) * scale;
  softmax_inplace(s);
  std::vector<double> ctx(d, 0.0);
  for (int i = 0; i < len; ++i)
    for (std::size_t c = 0; c < d; ++c) ctx[c] += s[i] * kv.v(i, c);
  double z = head.ctr_b;
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[c] * ctx[c];
  for (std::size_t c = 0; c < d; ++c) z += head.ctr_w[d + c] * candidate_emb[c];
  if (cache) {
    cache->len = len;
    cache->cand = candidate_emb;
    cache->q = std::move(q);
    cache->weights = std::move(s);
    cache->ctx = std::move(ctx);
    cache->logit = z;
    cache->prob = sigmoid(z);
  }
  return sigmoid(z);
}

void score_backward_kv(const TargetKV& kv, const TargetHeadParams& head, const TargetCache& cache,
                       double d_logit, TargetHeadParams& head_grads, Matrix& d_k, Matrix& d_v,
                       std::vector<double>& d_cand) {
  const std::size_t d = kv.k.cols;
  const int len = cache.len;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<double> d_ctx(d);
  for (std::size_t c = 0; c < d; ++c) {
    head_grads.ctr_w[c] += d_logit * cache.ctx[c];
    head_grads.ctr_w[d + c] += d_logit * cache.cand[c];
    d_ctx[c] = d_logit * head.ctr_w[c];
    d_cand[c] += d_logit * head.ctr_w[d + c];
  }
  head_grads.ctr_b += d_logit;

  std::vector<double> dw(len);
  double inner = 0.0;
  for (int i = 0; i < len; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) acc += d_ctx[c] * kv.v(i, c);
    dw[i] = acc;
    inner += acc * cache.weights[i];
  }
  std::vector<double> dq(d, 0.0);
  for (int i = 0; i < len; ++i) {
    const double ds = cache.weights[i] * (dw[i] - inner) * scale;
    for (std::size_t c = 0; c < d; ++c) {
      dq[c] += ds * kv.k(i, c);
      d_k(i, c) += ds * cache.q[c];
      d_v(i, c) += cache.weights[i] * d_ctx[c];
    }
  }
  for (std::size_t rc = 0; rc < d; ++rc) {
    double acc = 0.0;
    for (std::size_t cc = 0; cc < d; ++cc) {
      head_grads.wq(rc, cc) += cache.cand[rc] * dq[cc];
      acc += dq[cc] * head.wq(rc, cc);
    }
    d_cand[rc] += acc;
  }
}

void finish_kv_backward(const Matrix& hidden, const TargetHeadParams& head, const Matrix& d_k,
                        const Matrix& d_v, TargetHeadParams& head_grads, Matrix& d_hidden) {
  add_into(head_grads.wk, matmul(transpose(hidden), d_k));
  add_into(head_grads.wv, matmul(transpose(hidden), d_v));
  add_into(d_hidden, matmul(d_k, transpose(head.wk)));
  add_into(d_hidden, matmul(d_v, transpose(head.wv)));
}

std::vector<std::pair<int, double>> rank_items(const std::vector<int>& prefix,
                                               const SeqEncoderParams& params,
                                               const TargetHeadParams& head,
                                               const GraphFusion& fusion,
                                               const std::vector<int>& candidates) {
  if (prefix.empty()) throw std::invalid_argument("rank_items: empty prefix");
  if (candidates.empty()) throw std::invalid_argument("rank_items: no candidates");
  const Matrix hidden = encode_sequence(prefix, params, fusion);
  const int len = static_cast<int>(prefix.size());
  const TargetKV kv = precompute_target_kv(hidden, head);
  std::vector<std::pair<int, double>> scored;
  scored.reserve(candidates.size());
  for (int cand : candidates) {
    const auto ce = fused_item_embedding(params, cand, fusion);
    scored.emplace_back(cand, score_candidate_kv(kv, len, ce, head));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return scored;
}

}  // namespace sequda
