#pragma once

#include "crelab/decode/config.hpp"
#include "crelab/harness/dataset.hpp"
#include "crelab/metrics/records.hpp"
#include "crelab/mitigate/judge.hpp"
#include "crelab/probes/dataset.hpp"
#include "crelab/probes/report.hpp"
#include "crelab/tinylm/model.hpp"

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace crelab::harness {

struct ProbeBootstrapOptions {
  std::size_t samples = 200;
  std::size_t max_new_tokens = 48;
  std::uint64_t seed = 0;
};

/// Openings in the style of the synthetic training corpus.
const std::vector<std::string>& builtin_probe_prompts();

/// Techniques treated as the human reference when bootstrapping without a
/// dataset: every other technique of the synthetic training corpus.
const std::set<std::string>& builtin_reference_techniques();

/// Samples baseline continuations of the prompts (round robin), extracts
/// techniques with `judge` and scores each by its divergent ratio against
/// `reference`; an empty technique set scores 0.
std::vector<probes::ProbeSource> bootstrap_probe_sources(const tinylm::Model& model,
                                                         const decode::DecodeConfig& base,
                                                         mitigate::Judge& judge,
                                                         const std::vector<std::string>& prompts,
                                                         const std::set<std::string>& reference,
                                                         const ProbeBootstrapOptions& options);

/// Successful records of one method, scored against the dataset's human
/// techniques; prompts are rebuilt from the dataset.
std::vector<probes::ProbeSource> sources_from_records(
    const std::vector<metrics::GenerationRecord>& records, const Dataset& dataset,
    metrics::Method method = metrics::Method::baseline);

struct ProbePipelineOptions {
  double conditioning_fraction = probes::kDefaultConditioningFraction;
  std::uint64_t split_seed = 0;
  unsigned threads = 1;
};

/// Dataset construction, per-head training, layer aggregation, A/B selection.
probes::ProbeReport run_probe_pipeline(const tinylm::Model& model,
                                       const std::vector<probes::ProbeSource>& sources,
                                       const ProbePipelineOptions& options = {});

}  // namespace crelab::harness
