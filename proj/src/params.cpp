// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#include "sequda/params.hpp"

#include <cmath>
#include <stdexcept>

namespace sequda {

void Adam::step(ParamRegistry& reg) {
  const auto& entries = reg.entries();
  if (m_.empty()) {
    m_.resize(entries.size());
    v_.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      m_[i].assign(entries[i].n, 0.0);
      v_[i].assign(entries[i].n, 0.0);
    }
  }
  if (m_.size() != entries.size()) throw std::logic_error("Adam: registry changed size");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!e.grad) continue;
    for (std::size_t j = 0; j < e.n; ++j) {
      const double g = e.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      e.value[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace sequda
