// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sequda {

// Top-K ranking metrics over 1-based ranks of the single ground-truth
// item. NDCG uses 1/log2(rank+1); with one relevant item the ideal DCG
// is 1. MRR carries no cutoff.

inline double hr_at_k(int rank, int k) {
  if (rank < 1) throw std::invalid_argument("hr_at_k: rank must be >= 1");
  if (k < 1) throw std::invalid_argument("hr_at_k: k must be >= 1");
  return rank <= k ? 1.0 : 0.0;
}

inline double ndcg_at_k(int rank, int k) {
  if (rank < 1) throw std::invalid_argument("ndcg_at_k: rank must be >= 1");
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

inline double mrr(const std::vector<int>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("mrr: empty rank list");
  double acc = 0.0;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("mrr: rank must be >= 1");
    acc += 1.0 / static_cast<double>(r);
  }
  return acc / static_cast<double>(ranks.size());
}

}  // namespace sequda
