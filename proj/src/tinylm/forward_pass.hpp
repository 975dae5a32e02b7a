#pragma once

// Full-sequence forward pass with every intermediate kept, shared by
// inference (which reads the last position) and training (which needs all
// positions for backprop).

#include "crelab/tinylm/model.hpp"

#include <span>
#include <vector>

namespace crelab::tinylm::detail {

inline constexpr float kLayerNormEps = 1e-5f;

struct NormCache {
  std::vector<float> out;   // T x d
  std::vector<float> xhat;  // T x d
  std::vector<float> rstd;  // T
};

struct LayerCache {
  std::vector<float> x_in;   // T x d
  NormCache ln1;
  std::vector<float> qkv;    // T x 3d, [q | k | v]
  std::vector<float> probs;  // heads x T x T, causal rows
  std::vector<float> heads;  // T x d, concatenated per-head outputs
  std::vector<float> x_mid;  // T x d
  NormCache ln2;
  std::vector<float> up;     // T x ff, pre-activation
  std::vector<float> act;    // T x ff
  std::vector<float> x_out;  // T x d
};

struct ForwardPass {
  std::size_t length = 0;
  std::vector<LayerCache> layers;
};

void layer_norm(std::span<const float> x, std::span<const float> gain, std::span<const float> bias,
                std::size_t rows, std::size_t dim, NormCache& cache);

/// Single-row layer norm without caching.
void layer_norm_row(std::span<const float> x, std::span<const float> gain,
                    std::span<const float> bias, std::span<float> out);

float gelu(float u);
float gelu_grad(float u);

void run_forward(const ModelConfig& config, const Weights& weights, std::span<const Token> tokens,
                 ForwardPass& pass);

}  // namespace crelab::tinylm::detail
