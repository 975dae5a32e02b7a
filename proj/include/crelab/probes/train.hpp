#pragma once

#include "crelab/probes/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crelab::probes {

/// [layer][head] -> validation accuracy in [0, 1]. 0-based rows.
using HeadScores = std::vector<std::vector<double>>;

struct ProbeTrainOptions {
  std::size_t iterations = 500;
  double learning_rate = 0.1;
  double l2 = 1e-3;
  double train_fraction = 0.8;
};

/// Logistic-regression probe on one head's activation. Features are
/// standardized with training-split statistics before the linear map.
struct HeadProbe {
  std::vector<float> mean;
  std::vector<float> inv_std;
  std::vector<float> weights;
  float bias = 0.0f;

  /// Predicted label for a raw activation vector.
  int predict(std::span<const float> activation) const;
};

struct HeadProbeSet {
  ProbeGeometry geometry;
  std::string source_model_id;
  std::vector<HeadProbe> probes;  // layer-major

  const HeadProbe& at(int layer, int head) const;
};

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle, first ceil(train_fraction * n) indices train.
ProbeSplit split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

struct ProbeTraining {
  HeadScores head_scores;
  HeadProbeSet probes;
  ProbeSplit split;
};

/// Fits one probe per (layer, head) by full-batch gradient descent on the
/// training split and scores it on the validation split. Heads are trained
/// in parallel when `threads` > 1; results are identical either way.
ProbeTraining train_head_probes(const ProbeDataset& dataset, std::uint64_t split_seed,
                                const ProbeTrainOptions& options = {}, unsigned threads = 1);

/// Accuracy of already-trained probes on the given examples of `dataset`
/// (all examples when `indices` is empty).
HeadScores score_probes(const HeadProbeSet& probes, const ProbeDataset& dataset,
                        std::span<const std::size_t> indices = {});

}  // namespace crelab::probes
