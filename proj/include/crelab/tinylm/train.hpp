#pragma once

#include "crelab/tinylm/model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace crelab::tinylm {

using Corpus = std::vector<std::vector<Token>>;

struct TrainOptions {
  std::size_t steps = 500;
  std::size_t batch_size = 4;
  std::size_t seq_len = 32;  // clamped to max_seq_len - 1
  float learning_rate = 3e-3f;
  float grad_clip = 1.0f;
  std::uint64_t seed = 1;
};

struct TrainLog {
  std::vector<float> step_losses;
};

/// Next-token cross-entropy training with Adam on random windows of the
/// corpus. Sequences are joined as BOS seq EOS BOS seq EOS ... before
/// windowing. Deterministic given (model, corpus, options).
Model train_toy(const Model& model, const Corpus& corpus, const TrainOptions& options,
                TrainLog* log = nullptr);

/// Mean next-token cross-entropy (nats) over consecutive windows covering the
/// joined corpus.
double mean_cross_entropy(const Model& model, const Corpus& corpus, std::size_t seq_len);

/// Loss on one window (inputs = window[0..n-1], targets = window[1..n]) and
/// its gradient, accumulated into `grad` scaled by `grad_scale`.
double loss_and_gradient(const Model& model, std::span<const Token> window, Weights& grad,
                         float grad_scale = 1.0f);

/// Joins sequences into the training stream.
std::vector<Token> join_corpus(const Corpus& corpus);

/// Short programming-technique sentences for toy training, so the toy
/// model's generations carry technique vocabulary the rule-based judge can
/// recognize.
Corpus synthetic_corpus(std::uint64_t seed, std::size_t lines);

}  // namespace crelab::tinylm
