#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::tinylm {

using Token = std::int32_t;

/// Byte-level tokenizer: token id == byte value, plus two special tokens.
class Tokenizer {
 public:
  static constexpr Token kBos = 256;
  static constexpr Token kEos = 257;
  static constexpr int kVocabSize = 258;

  static std::vector<Token> encode(std::string_view text);

  /// Special tokens and out-of-range ids are dropped.
  static std::string decode(std::span<const Token> tokens);
};

}  // namespace crelab::tinylm
