#pragma once

#include "crelab/tinylm/tokenizer.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crelab::tinylm {

struct ModelConfig {
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 64;
  int d_head = 16;
  int vocab_size = Tokenizer::kVocabSize;
  int max_seq_len = 64;
  std::uint64_t seed = 7;

  int d_ff() const { return 4 * d_model; }

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Per-step observation of every layer at the last input position.
/// Layer indices in the accessors are 1-based (layer N is the final layer).
struct LayerTrace {
  std::size_t step_index = 0;
  std::vector<std::vector<float>> hidden_states;                  // N x d_model
  std::vector<std::vector<float>> early_exit_dists;               // N x vocab
  std::vector<std::vector<std::vector<float>>> head_activations;  // N x heads x d_head

  int n_layers() const { return static_cast<int>(early_exit_dists.size()); }
  std::span<const float> q(int layer) const;
  std::span<const float> hidden(int layer) const;
  std::span<const float> final_dist() const { return q(n_layers()); }
};

struct LayerWeights {
  std::vector<float> ln1_gain, ln1_bias;  // d
  std::vector<float> w_qkv, b_qkv;        // 3d x d, 3d
  std::vector<float> w_out, b_out;        // d x d, d
  std::vector<float> ln2_gain, ln2_bias;  // d
  std::vector<float> w_up, b_up;          // ff x d, ff
  std::vector<float> w_down, b_down;      // d x ff, d
};

/// All parameters. Linear maps are row-major [out][in].
struct Weights {
  std::vector<float> tok_emb;  // vocab x d
  std::vector<float> pos_emb;  // max_seq_len x d
  std::vector<LayerWeights> layers;
  std::vector<float> lnf_gain, lnf_bias;  // d
  std::vector<float> unembed;             // vocab x d

  static Weights zeros(const ModelConfig& config);

  /// Every tensor in the fixed serialization order.
  std::vector<std::span<float>> tensors();
  std::vector<std::span<const float>> tensors() const;
  std::size_t parameter_count() const;
};

class Model {
 public:
  /// Deterministic initialization from config.seed.
  static Model init(const ModelConfig& config);

  /// Takes ownership of existing weights; shapes are checked against config.
  Model(ModelConfig config, Weights weights);

  const ModelConfig& config() const { return config_; }
  const Weights& weights() const { return weights_; }
  Weights& mutable_weights() { return weights_; }

  /// Requires 1 <= tokens.size() <= max_seq_len.
  LayerTrace forward(std::span<const Token> tokens) const;

  /// q_j = softmax(unembed(final_norm(hidden))); layer is 1-based.
  std::vector<float> early_exit(std::span<const float> hidden, int layer) const;

  /// FNV-1a over the config block and every weight bit.
  std::uint64_t checksum() const;

  /// Stable identifier derived from the checksum ("tlm-<hex>").
  std::string id() const;

 private:
  ModelConfig config_;
  Weights weights_;
};

/// softmax in place with a double-precision normalizer.
void softmax_inplace(std::span<float> values);

}  // namespace crelab::tinylm
