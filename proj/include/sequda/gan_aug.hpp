// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sequda/dataset.hpp"
#include "sequda/params.hpp"
#include "sequda/rng.hpp"
#include "sequda/tensor.hpp"

namespace sequda {

// Autoregressive generator: item embeddings, one causal single-head
// self-attention layer with a residual, and an output projection to
// next-item logits. Owns its own small tables; never shares embeddings
// with the main model, so augmentation stays isolated from
// representation learning.
struct GeneratorParams {
  int d = 0;
  int n_items = 0;
  Matrix emb;               // n_items x d
  Matrix wq, wk, wv;        // d x d
  Matrix w_out;             // n_items x d (logits = h * w_out^T + b_out)
  std::vector<double> b_out;

  static GeneratorParams init(Rng& rng, int n_items, int d);
  static GeneratorParams zeros_like(const GeneratorParams& p);
  void register_into(ParamRegistry& reg, GeneratorParams* grads);
};

// Order-blind discriminator: item embeddings, mean-pool over positions,
// then a 2-layer perceptron with ReLU and a sigmoid output.
struct DiscriminatorParams {
  int d = 0;
  int n_items = 0;
  Matrix emb;               // n_items x d
  Matrix w1;                // d x d
  std::vector<double> b1;   // d
  std::vector<double> w2;   // d
  double b2 = 0.0;

  static DiscriminatorParams init(Rng& rng, int n_items, int d);
  static DiscriminatorParams zeros_like(const DiscriminatorParams& p);
  void register_into(ParamRegistry& reg, DiscriminatorParams* grads);
};

struct AugmentConfig {
  double ratio = 0.2;            // generated-to-real count ratio
  int gen_len = 10;              // generated suffix length
  int prefix_len = 3;            // real-prefix seed length
  double accept_threshold = 0.5; // minimum discriminator score to accept
  double baseline_decay = 0.9;   // REINFORCE baseline EMA decay
  int gan_epochs = 1;            // adversarial passes per outer round
};

// For each prefix, appends gen_len autoregressively sampled items
// (softmax over next-item logits).
std::vector<std::vector<int>> generate_sequences(const GeneratorParams& gen, Rng& rng,
                                                 const std::vector<std::vector<int>>& prefixes,
                                                 int gen_len);

double discriminate(const DiscriminatorParams& disc, const std::vector<int>& seq);

// BCE gradient for one sequence with label `target` (1 real / 0 fake);
// accumulates into grads scaled by `scale`, returns the BCE loss.
double discriminator_backward(const DiscriminatorParams& disc, const std::vector<int>& seq,
                              double target, DiscriminatorParams& grads, double scale);

// REINFORCE surrogate for one generated sequence: accumulates
// advantage * d(-sum log p(sampled token))/dtheta into grads, returns
// sum of log-probs of the sampled suffix. `prefix_len` marks where the
// sampled suffix starts. Constant reward == baseline gives exactly zero
// gradient.
double generator_reinforce_backward(const GeneratorParams& gen, const std::vector<int>& seq,
                                    int prefix_len, double advantage, GeneratorParams& grads,
                                    double scale);

struct GanStepResult {
  double disc_loss = 0.0;
  double gen_loss = 0.0;
  double mean_reward = 0.0;
};

// One adversarial round over a real batch: discriminator BCE on
// real-vs-fresh-fakes, then a REINFORCE generator step against
// discriminator reward with the moving-average baseline. Gradients land
// in the provided grad structs; parameter updates belong to the caller.
GanStepResult train_gan_step(const GeneratorParams& gen, const DiscriminatorParams& disc,
                             const std::vector<UserSequence>& real_batch, Rng& rng,
                             const AugmentConfig& cfg, GeneratorParams& gen_grads,
                             DiscriminatorParams& disc_grads, double& baseline);

struct AugmentAudit {
  std::size_t generated = 0;
  std::size_t accepted = 0;
  double mean_disc_score = 0.0;

  std::string to_json(const AugmentConfig& cfg) const;
};

struct AugmentedPool {
  std::vector<UserSequence> sequences;
  std::vector<std::uint8_t> synthetic;  // parallel tag; 1 = generated
  AugmentAudit audit;
};

// real ++ accepted synthetic. ceil(ratio * |real|) candidates are grown
// from random real prefixes and kept when the discriminator scores them
// at or above the acceptance threshold.
AugmentedPool augment_pool(const std::vector<UserSequence>& real, const GeneratorParams& gen,
                           const DiscriminatorParams& disc, const AugmentConfig& cfg, Rng& rng);

}  // namespace sequda
