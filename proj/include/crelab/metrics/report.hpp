#pragma once

#include "crelab/metrics/metrics.hpp"
#include "crelab/metrics/records.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace crelab::metrics {

enum class MetricFamily { neocoder, cs4 };

enum class MetricId {
  neocoder_convergent,
  neocoder_divergent,
  constraint_satisfaction,
  coherence,
  quc,
  dist_n,
};

const char* to_string(MetricId id) noexcept;
std::vector<MetricId> metrics_for(MetricFamily family);

struct PctDiff {
  std::optional<double> value;
  std::string undefined_reason;  // zero-baseline, missing-baseline, no-value

  bool operator==(const PctDiff&) const = default;
};

struct MetricCell {
  std::optional<double> value;  // mean over runs with a defined value
  std::size_t n_samples = 0;
  std::size_t n_runs = 0;
  PctDiff pct;

  bool operator==(const MetricCell&) const = default;
};

struct CellCoverage {
  std::size_t records = 0;
  std::size_t failed = 0;
  bool complete() const { return records > 0; }
  bool operator==(const CellCoverage&) const = default;
};

struct ReportDiagnostics {
  std::size_t failed_records = 0;
  std::size_t unknown_verdicts = 0;
  std::size_t empty_technique_sets = 0;
  std::size_t too_short_for_dist_n = 0;

  bool operator==(const ReportDiagnostics&) const = default;
};

struct MetricReport {
  MetricFamily family = MetricFamily::neocoder;
  Method baseline = Method::baseline;
  std::vector<Method> methods;
  std::vector<int> states;
  std::vector<MetricId> metrics;
  std::map<std::tuple<Method, int, MetricId>, MetricCell> cells;
  std::map<std::pair<Method, int>, CellCoverage> coverage;
  ReportDiagnostics diagnostics;

  const MetricCell& cell(Method m, int state, MetricId id) const;
  bool operator==(const MetricReport&) const = default;
};

struct ReportOptions {
  MetricFamily family = MetricFamily::neocoder;
  Method baseline = Method::baseline;
  /// Empty: taken from the records (enum order / ascending).
  std::vector<Method> methods;
  std::vector<int> states;
  /// Throw ReportError listing every compared cell that lacks a baseline.
  /// When false those cells get pct "missing-baseline" instead.
  bool require_baseline = true;
  const HumanTechniques* human_techniques = nullptr;  // needed for neocoder
};

/// Per (method, state) cell: metrics computed per run, averaged over runs,
/// then compared to the baseline cell of the same state. Independent of
/// record order.
MetricReport build_report(std::span<const GenerationRecord> records, const ReportOptions& options);

/// Columns: method,state,metric,value,pct_diff,n_samples
std::string to_csv(const MetricReport& report);

/// gnuplot data: a comment header, then one row per state with one pct_diff
/// column per method; undefined entries are NaN.
std::string plot_data(const MetricReport& report, MetricId metric);

}  // namespace crelab::metrics
