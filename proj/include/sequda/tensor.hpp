// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sequda {

// Dense row-major matrix of 64-bit reals. All training math is double
// precision; checkpoints round to float32 on save.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::span<double> row_span(std::size_t r) { return {row(r), cols}; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }

  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// C = A * B. Summation over the inner index runs left to right, so the
// result is bit-reproducible. Throws std::invalid_argument on shape
// mismatch, reporting both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// y = x * W  for a row vector x (len d_in), W of shape d_in x d_out.
void vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out);

// y = x * W^T for a row vector x (len d_out), W of shape d_in x d_out.
void vec_mat_t(std::span<const double> x, const Matrix& w, std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Temperature softmax with max-subtraction. Throws on empty input or
// non-positive temperature.
std::vector<double> softmax(std::span<const double> v, double temperature = 1.0);
void softmax_inplace(std::span<double> v, double temperature = 1.0);

// Cosine similarity in [-1, 1]. A zero-norm input yields 0 and sets
// *zero_norm (untrained-embedding edge case; avoids NaN).
double cosine_sim(std::span<const double> a, std::span<const double> b, bool* zero_norm = nullptr);

double sigmoid(double x);

// Binary cross-entropy from the logit, numerically stable:
// softplus(z) - target*z.
double bce_with_logit(double logit, double target);
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

bool all_finite(std::span<const double> v);
void check_finite(const Matrix& m, const char* what);

// Central-difference gradient check. Returns
//   max_i |analytic_i - fd_i| / max(1, |analytic_i|)
// with fd_i = (f(p + eps e_i) - f(p - eps e_i)) / (2 eps).
// Throws if f evaluates non-finite at any probe point.
double grad_check(const std::function<double(const std::vector<double>&)>& f,
                  const std::vector<double>& params, const std::vector<double>& analytic,
                  double eps);

}  // namespace sequda
