#pragma once

#include "crelab/decode/config.hpp"
#include "crelab/decode/scores.hpp"
#include "crelab/tinylm/model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crelab::decode {

struct GenerationResult {
  std::vector<tinylm::Token> tokens;  // continuation only
  std::string text;                   // continuation decoded as bytes
  std::vector<StepScores> steps;
};

struct GenerateOptions {
  /// Stop token; defaults to Tokenizer::kEos when it is inside the vocabulary.
  std::optional<tinylm::Token> eos;
  bool keep_steps = true;
};

/// Autoregressive loop up to max_new_tokens or EOS. The context is the last
/// max_seq_len tokens. Deterministic given (model, prompt, config).
GenerationResult generate(const tinylm::Model& model, std::span<const tinylm::Token> prompt,
                          const DecodeConfig& config, const GenerateOptions& options = {});

}  // namespace crelab::decode
