// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sequda {

static std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: dimension mismatch " + shape_str(a) + " * " +
                                shape_str(b));
  }
  // ikj order: each c(i,j) still accumulates over k in ascending order
  // (bit-identical to the naive loop), but every inner access is sequential.
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = &c.data[i * c.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      const double* bk = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

void vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out) {
  if (x.size() != w.rows || out.size() != w.cols)
    throw std::invalid_argument("vec_mat: shape mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    const double* wi = &w.data[i * w.cols];
    for (std::size_t j = 0; j < w.cols; ++j) out[j] += xi * wi[j];
  }
}

void vec_mat_t(std::span<const double> x, const Matrix& w, std::span<double> out) {
  if (x.size() != w.cols || out.size() != w.rows)
    throw std::invalid_argument("vec_mat_t: shape mismatch");
  for (std::size_t i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += x[j] * w(i, j);
    out[i] = acc;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void softmax_inplace(std::span<double> v, double temperature) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be > 0");
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp((x - mx) / temperature);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

std::vector<double> softmax(std::span<const double> v, double temperature) {
  std::vector<double> out(v.begin(), v.end());
  softmax_inplace(out, temperature);
  return out;
}

double cosine_sim(std::span<const double> a, std::span<const double> b, bool* zero_norm) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_sim: length mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (zero_norm) *zero_norm = false;
  if (na == 0.0 || nb == 0.0) {
    if (zero_norm) *zero_norm = true;
    return 0.0;
  }
  double s = dot(a, b) / (na * nb);
  return std::clamp(s, -1.0, 1.0);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_with_logit(double logit, double target) {
  const double sp =
      logit > 0.0 ? logit + std::log1p(std::exp(-logit)) : std::log1p(std::exp(logit));
  return sp - target * logit;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void check_finite(const Matrix& m, const char* what) {
  if (!all_finite(m.data)) throw std::runtime_error(std::string("non-finite values in ") + what);
}

double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& params, const std::vector<double>& analytic,
                  double eps) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: size mismatch");
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
  std::vector<double> p = params;
  double max_err = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + eps;
    const double fp = f(p);
    p[i] = orig - eps;
    const double fm = f(p);
    p[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("grad_check: non-finite objective at probe point");
    const double fd = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
    max_err = std::max(max_err, err);
  }
  return max_err;
}

}  // namespace sequda
