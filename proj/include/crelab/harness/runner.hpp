#pragma once

#include "crelab/harness/checker.hpp"
#include "crelab/harness/dataset.hpp"
#include "crelab/harness/plan.hpp"
#include "crelab/metrics/report.hpp"
#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/judge.hpp"
#include "crelab/mitigate/retrieval.hpp"
#include "crelab/mitigate/templates.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crelab::harness {

struct Backends {
  mitigate::Generator* generator = nullptr;
  mitigate::Judge* judge = nullptr;
  CorrectnessChecker* checker = nullptr;
  const mitigate::RetrievalIndex* index = nullptr;  // required for rag
  mitigate::TemplateSet templates = mitigate::default_templates();
};

struct CellKey {
  std::size_t problem = 0;  // index into the dataset
  int state = 0;
  metrics::Method method = metrics::Method::baseline;
  int run = 1;
};

/// Canonical cell order: problem, state, method (plan order), run.
std::vector<CellKey> plan_cells(const ExperimentPlan& plan, const Dataset& dataset);

/// cs4 coherence reference state: the planned state closest to 23, lower on ties.
int reference_state(const std::vector<int>& states);

struct RunSummary {
  std::size_t total = 0;
  std::size_t resumed = 0;   // read back from the archive
  std::size_t executed = 0;  // run in this call and appended
  std::size_t failed = 0;    // failed cells in the archive
  bool complete = false;
};

struct ExperimentResult {
  std::vector<metrics::GenerationRecord> records;  // canonical order
  RunSummary summary;
  std::optional<metrics::MetricReport> report;     // set when complete
};

inline constexpr const char* kArchiveName = "archive.jsonl";

/// Runs every cell not already in <out>/archive.jsonl and appends results in
/// canonical order, so an interrupted run resumes to the same bytes.
ExperimentResult run_experiment(const ExperimentPlan& plan, const Dataset& dataset,
                                Backends& backends, std::ostream* log = nullptr);

/// Non-strict report over the plan's methods and states.
metrics::MetricReport build_plan_report(const ExperimentPlan& plan, const Dataset& dataset,
                                        const std::vector<metrics::GenerationRecord>& records,
                                        bool strict = false);

/// Generates, judges and checks one cell. Failures are captured in the
/// record's error field.
metrics::GenerationRecord run_cell(const ExperimentPlan& plan, const Dataset& dataset,
                                   const CellKey& cell, Backends& backends,
                                   const std::string& reference_story, std::ostream* log);

}  // namespace crelab::harness
