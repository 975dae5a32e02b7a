#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace crelab {
class KeyValues;
}

namespace crelab::decode {

enum class Strategy { baseline, dola, creative_dola };

const char* to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view text);

/// Every decoding knob. Layer indices are 1-based; layer N is the final layer.
struct DecodeConfig {
  Strategy strategy = Strategy::baseline;
  /// Premature-layer candidates; empty means the default (even layers below N).
  std::vector<int> candidate_layers;
  float beta = 0.1f;
  float alpha = 1.0f;
  float gamma_default = 0.5f;
  std::map<int, float> gamma;  // per-layer overrides of gamma_default
  std::vector<int> set_A;
  std::vector<int> set_B;
  std::size_t max_new_tokens = 800;
  float temperature = 1.0f;
  float top_p = 1.0f;
  bool do_sample = true;
  std::uint64_t rng_seed = 0;
  /// Model id the A/B sets were derived from; creative DoLa refuses to run
  /// against a different model when this is set.
  std::string probe_model_id;

  float gamma_for(int layer) const;

  /// Candidate layers with the default applied.
  std::vector<int> resolved_candidates(int n_layers) const;

  /// Throws ConfigError if any invariant fails for a model with n_layers.
  void validate(int n_layers) const;

  bool operator==(const DecodeConfig&) const = default;
};

/// Even-indexed layers strictly below N: {2, 4, ...}.
std::vector<int> default_candidate_layers(int n_layers);

/// Field names, identical to the CLI flag names.
const std::vector<std::string>& decode_config_keys();

/// Applies recognized keys from `kv`; other keys are left untouched.
void apply_decode_keys(const KeyValues& kv, DecodeConfig& config);

/// Text format: one `key = value` line per field; layer sets are
/// comma-separated indices; gamma is `default[,layer:value...]`.
std::string to_text(const DecodeConfig& config);
DecodeConfig parse_decode_config(std::string_view text);

std::string format_gamma(const DecodeConfig& config);
void parse_gamma(std::string_view text, DecodeConfig& config);

}  // namespace crelab::decode
