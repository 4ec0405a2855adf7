// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sequda/tensor.hpp"

namespace sequda {

// Flat view over a model's parameter tensors paired with gradient
// buffers of identical shape. The registration order is fixed by the
// owning model and doubles as the checkpoint tensor order.
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    double* value;
    double* grad;  // may be null when only values are needed (checkpointing)
    std::size_t n;
    std::vector<std::size_t> shape;
  };

  void add(std::string name, Matrix& value, Matrix* grad) {
    entries_.push_back({std::move(name), value.data.data(), grad ? grad->data.data() : nullptr,
                        value.size(), {value.rows, value.cols}});
  }
  void add(std::string name, std::vector<double>& value, std::vector<double>* grad) {
    entries_.push_back({std::move(name), value.data(), grad ? grad->data() : nullptr,
                        value.size(), {value.size()}});
  }
  void add_scalar(std::string name, double& value, double* grad) {
    entries_.push_back({std::move(name), &value, grad, 1, {1}});
  }

  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.n;
    return n;
  }

  std::vector<double> flatten_values() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& e : entries_) out.insert(out.end(), e.value, e.value + e.n);
    return out;
  }

  std::vector<double> flatten_grads() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& e : entries_) out.insert(out.end(), e.grad, e.grad + e.n);
    return out;
  }

  void unflatten_values(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (auto& e : entries_) {
      std::copy(flat.begin() + off, flat.begin() + off + e.n, e.value);
      off += e.n;
    }
  }

  void zero_grads() {
    for (auto& e : entries_)
      if (e.grad) std::fill(e.grad, e.grad + e.n, 0.0);
  }

 private:
  std::vector<Entry> entries_;
};

// Adam over a registry. State is allocated lazily on first step so the
// registry may be built after construction.
class Adam {
 public:
  Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamRegistry& reg);
  void reset() { m_.clear(); v_.clear(); t_ = 0; }

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace sequda
