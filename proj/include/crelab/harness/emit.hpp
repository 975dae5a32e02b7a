#pragma once

#include "crelab/harness/dataset.hpp"
#include "crelab/harness/plan.hpp"
#include "crelab/metrics/report.hpp"

#include <string>
#include <vector>

namespace crelab::harness {

inline constexpr const char* kToolVersion = "0.1.0";

struct EmitContext {
  const ExperimentPlan* plan = nullptr;
  const Dataset* dataset = nullptr;
  std::string model_id;        // local generator only
  std::string probe_model_id;  // when a probe report was applied
};

/// Pretty-printed manifest: tool version, config hash, dataset hash, seeds,
/// coverage. Contains no timestamps or output paths.
std::string manifest_json(const EmitContext& ctx, const metrics::MetricReport& report,
                          const std::vector<metrics::GenerationRecord>& records);

/// "pct_<metric>.dat"
std::string plot_file_name(metrics::MetricId metric);

/// Writes metrics.csv, one pct_<metric>.dat per metric, records.jsonl and
/// manifest.json into `out_dir`. Returns the file names written.
std::vector<std::string> emit_outputs(const EmitContext& ctx, const metrics::MetricReport& report,
                                      const std::vector<metrics::GenerationRecord>& records,
                                      const std::string& out_dir);

}  // namespace crelab::harness
