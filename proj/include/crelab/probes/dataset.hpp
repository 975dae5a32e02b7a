#pragma once

#include "crelab/tinylm/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace crelab::probes {

inline constexpr double kDefaultConditioningFraction = 0.4;

struct ProbeGeometry {
  int n_layers = 0;
  int n_heads = 0;
  int d_head = 0;

  std::size_t feature_size() const {
    return static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n_heads) *
           static_cast<std::size_t>(d_head);
  }
  bool operator==(const ProbeGeometry&) const = default;
};

ProbeGeometry geometry_of(const tinylm::ModelConfig& config);

struct ProbeExample {
  std::vector<float> features;  // layer-major, then head, then d_head
  int label = 0;
};

struct ProbeDataset {
  ProbeGeometry geometry;
  std::vector<ProbeExample> examples;
  double conditioning_fraction = kDefaultConditioningFraction;
  std::string source_model_id;

  /// Activation of one head (0-based layer/head) for example i.
  std::span<const float> head(std::size_t i, int layer, int head) const;

  /// Throws DatasetError: geometry mismatch, one-class labels, or no examples.
  void validate() const;
};

/// One generation to bootstrap from: the prompt it answered, the text it
/// produced, and its divergent-creativity score.
struct ProbeSource {
  std::string prompt;
  std::string output;
  double divergent_score = 0.0;
};

/// Number of output bytes used as conditioning: floor(fraction * len).
std::size_t conditioning_length(std::size_t output_length, double fraction);

/// Median-split labels: 1 iff score > median of all scores.
std::vector<int> median_split_labels(std::span<const double> scores);

/// Feeds BOS + prompt + first floor(fraction * |output|) output bytes through
/// the model (truncated from the left to max_seq_len) and records every
/// head's activation at the last position. Throws DatasetError when the
/// median split leaves a single class.
ProbeDataset build_probe_dataset(std::span<const ProbeSource> sources, const tinylm::Model& model,
                                 double fraction = kDefaultConditioningFraction);

/// The token context build_probe_dataset feeds for one source.
std::vector<tinylm::Token> conditioning_context(const ProbeSource& source,
                                                const tinylm::ModelConfig& config,
                                                double fraction);

}  // namespace crelab::probes
