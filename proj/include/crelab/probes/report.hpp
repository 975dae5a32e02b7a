#pragma once

#include "crelab/decode/config.hpp"
#include "crelab/probes/train.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crelab::probes {

inline constexpr int kMaxLayerSetSize = 5;

/// Layer sets use 1-based layer indices, like the decoder.
struct ProbeReport {
  ProbeGeometry geometry;
  std::string source_model_id;
  HeadScores head_scores;
  std::vector<double> layer_scores;
  std::vector<int> set_A;
  std::vector<int> set_B;
};

/// Mean of each row.
std::vector<double> aggregate_to_layers(const HeadScores& head_scores);

/// k = min(5, floor(n/2)). Layers ranked by score descending, ties to the
/// lower index; A = first k of the ranking, B = last k.
std::pair<std::vector<int>, std::vector<int>> select_layer_sets(std::span<const double> layer_scores);

ProbeReport make_report(const HeadScores& head_scores, const ProbeGeometry& geometry,
                        std::string source_model_id);

/// True iff the report was built from the named model's activations.
bool check_model_specificity(const ProbeReport& report, std::string_view model_id);

/// Copies A/B into the config and pins it to the report's model id. Throws
/// ConfigError when the report belongs to a different model.
void apply_probe_report(const ProbeReport& report, std::string_view model_id,
                        decode::DecodeConfig& config);

// Versioned text format:
//   crelab-probe-report 1
//   model_id <id>
//   geometry <n_layers> <n_heads> <d_head>
//   head <layer> <head> <accuracy>      (1-based, one per head, layer-major)
//   set_A <comma-separated layers>
//   set_B <comma-separated layers>
std::string to_text(const ProbeReport& report);
ProbeReport parse_probe_report(std::string_view text);
void save_probe_report(const ProbeReport& report, const std::string& path);
ProbeReport load_probe_report(const std::string& path);

}  // namespace crelab::probes
