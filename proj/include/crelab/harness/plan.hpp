#pragma once

#include "crelab/decode/config.hpp"
#include "crelab/harness/dataset.hpp"
#include "crelab/metrics/records.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace crelab {
class KeyValues;
}

namespace crelab::harness {

struct ExperimentPlan {
  std::string dataset;
  DatasetKind kind = DatasetKind::neocoder;
  std::vector<metrics::Method> methods{metrics::Method::baseline};
  /// Empty: 0..5 for neocoder, {7, 15, 23, 31, 39} for cs4.
  std::vector<int> states;
  int runs = 3;
  std::string generator = "mock";  // mock | echo | local | endpoint
  std::string judge = "rule";      // rule | generator
  std::string checker = "exact";   // exact | unknown | command:<template>
  std::string model;               // weights file for the local generator
  std::string probe_report;        // A/B sets for creative_dola
  std::string corpus;              // rag corpus (JSON lines or directory)
  std::size_t rag_k = 3;
  bool cove_per_question = false;
  std::string templates;           // template directory; empty uses built-ins
  std::string lexicon;             // technique lexicon; empty uses the built-in
  std::string out;                 // output directory
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Stop after this many newly completed cells (0 = run to the end).
  std::size_t max_cells = 0;
  decode::DecodeConfig decode;

  std::vector<int> resolved_states() const;
  bool has_method(metrics::Method m) const;

  /// Throws ConfigError on an inconsistent plan.
  void validate() const;
};

std::vector<int> default_states(DatasetKind kind);

/// Plan keys (identical to CLI flag names); decode keys are accepted too.
const std::vector<std::string>& plan_keys();
void apply_plan_keys(const KeyValues& kv, ExperimentPlan& plan);
ExperimentPlan parse_plan(std::string_view text);

/// `key = value` text of every field that can change results (out, workers
/// and max_cells are left out).
std::string to_text(const ExperimentPlan& plan);
std::uint64_t config_hash(const ExperimentPlan& plan);

std::string format_methods(const std::vector<metrics::Method>& methods);
std::vector<metrics::Method> parse_methods(std::string_view text);

/// hash(global seed, problem id, state, method, run).
std::uint64_t cell_seed(std::uint64_t global_seed, std::string_view problem_id, int state,
                        metrics::Method method, int run);

}  // namespace crelab::harness
