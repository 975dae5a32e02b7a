#pragma once

// Weight file layout (little-endian):
//
//   offset  size  field
//   0       4     magic "TLM1"
//   4       4     u32 format version (1)
//   8       4     u32 n_layers
//   12      4     u32 n_heads
//   16      4     u32 d_model
//   20      4     u32 d_head
//   24      4     u32 vocab_size
//   28      4     u32 max_seq_len
//   32      4     u32 d_ff
//   36      8     u64 seed
//   44      8     u64 parameter count
//   52      ...   f32 tensors, row-major, in this order:
//                   tok_emb [vocab][d], pos_emb [max_seq_len][d],
//                   per layer: ln1_gain, ln1_bias, w_qkv [3d][d], b_qkv,
//                     w_out [d][d], b_out, ln2_gain, ln2_bias,
//                     w_up [ff][d], b_up, w_down [d][ff], b_down,
//                   lnf_gain, lnf_bias, unembed [vocab][d]
//   end-8   8     u64 FNV-1a checksum of everything before it

#include "crelab/tinylm/model.hpp"

#include <string>

namespace crelab::tinylm {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

void save_model(const Model& model, const std::string& path);

/// Throws LoadError on a malformed file, IoError if it cannot be read.
Model load_model(const std::string& path);

/// As above, and throws LoadError unless the stored config equals `expected`.
Model load_model(const std::string& path, const ModelConfig& expected);

}  // namespace crelab::tinylm
