#include "crelab/metrics/report.hpp"

#include "crelab/common/error.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace crelab::metrics {

namespace {

using RunGroups = std::map<int, std::vector<const GenerationRecord*>>;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool canonical_less(const GenerationRecord* a, const GenerationRecord* b) {
  return std::tie(a->problem_id, a->seed, a->output_text, a->techniques, a->constraints_violated,
                  a->verdict) < std::tie(b->problem_id, b->seed, b->output_text, b->techniques,
                                         b->constraints_violated, b->verdict);
}

struct RunValue {
  std::optional<double> value;
  std::size_t samples = 0;
};

std::vector<GenerationRecord> materialize(const std::vector<const GenerationRecord*>& run) {
  std::vector<GenerationRecord> out;
  out.reserve(run.size());
  for (const auto* r : run) out.push_back(*r);
  return out;
}

std::optional<double> mean_cs(const std::vector<const GenerationRecord*>& run, std::size_t& n) {
  double sum = 0.0;
  n = 0;
  for (const auto* r : run) {
    if (!r->judge.satisfied || !r->judge.total || *r->judge.total <= 0) continue;
    sum += constraint_satisfaction(*r->judge.satisfied, *r->judge.total);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> mean_coherence(const std::vector<const GenerationRecord*>& run,
                                     std::size_t& n) {
  double sum = 0.0;
  n = 0;
  for (const auto* r : run) {
    if (!r->judge.coherence) continue;
    sum += *r->judge.coherence;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return coherence_norm(sum / static_cast<double>(n));
}

RunValue run_metric(MetricId id, const std::vector<const GenerationRecord*>& run,
                    const HumanTechniques* human, ReportDiagnostics& diag) {
  RunValue out;
  switch (id) {
    case MetricId::neocoder_convergent: {
      const auto recs = materialize(run);
      std::size_t unknown = 0;
      for (const auto& r : recs) unknown += r.verdict == Verdict::unknown;
      diag.unknown_verdicts += unknown;
      if (unknown == recs.size()) return out;
      const auto v = neocoder_convergent(recs);
      out.value = v.value;
      out.samples = v.n_samples;
      return out;
    }
    case MetricId::neocoder_divergent: {
      if (human == nullptr) throw ReportError("divergent metric needs human technique sets");
      const auto recs = materialize(run);
      std::size_t empty = 0;
      for (const auto& r : recs) empty += r.techniques.empty();
      diag.empty_technique_sets += empty;
      if (empty == recs.size()) return out;
      const auto v = neocoder_divergent(recs, *human);
      out.value = v.value;
      out.samples = v.n_samples;
      return out;
    }
    case MetricId::constraint_satisfaction:
      out.value = mean_cs(run, out.samples);
      return out;
    case MetricId::coherence:
      out.value = mean_coherence(run, out.samples);
      return out;
    case MetricId::quc: {
      std::size_t n_cs = 0;
      std::size_t n_coh = 0;
      const auto cs = mean_cs(run, n_cs);
      const auto coh = mean_coherence(run, n_coh);
      if (!cs || !coh) return out;
      out.value = quc(*coh, *cs);
      out.samples = std::min(n_cs, n_coh);
      return out;
    }
    case MetricId::dist_n: {
      double sum = 0.0;
      for (const auto* r : run) {
        try {
          sum += dist_n(r->output_text);
          ++out.samples;
        } catch (const UndefinedMetricError&) {
          ++diag.too_short_for_dist_n;
        }
      }
      if (out.samples > 0) out.value = sum / static_cast<double>(out.samples);
      return out;
    }
  }
  return out;
}

}  // namespace

const char* to_string(MetricId id) noexcept {
  switch (id) {
    case MetricId::neocoder_convergent: return "convergent";
    case MetricId::neocoder_divergent: return "divergent";
    case MetricId::constraint_satisfaction: return "constraint_satisfaction";
    case MetricId::coherence: return "coherence";
    case MetricId::quc: return "quc";
    case MetricId::dist_n: return "dist_n";
  }
  return "unknown";
}

std::vector<MetricId> metrics_for(MetricFamily family) {
  if (family == MetricFamily::neocoder) {
    return {MetricId::neocoder_convergent, MetricId::neocoder_divergent};
  }
  return {MetricId::constraint_satisfaction, MetricId::coherence, MetricId::quc, MetricId::dist_n};
}

const MetricCell& MetricReport::cell(Method m, int state, MetricId id) const {
  const auto it = cells.find({m, state, id});
  if (it == cells.end()) {
    throw ReportError(std::string("no cell for ") + to_string(m) + " state " +
                      std::to_string(state) + " metric " + to_string(id));
  }
  return it->second;
}

MetricReport build_report(std::span<const GenerationRecord> records, const ReportOptions& options) {
  MetricReport rep;
  rep.family = options.family;
  rep.baseline = options.baseline;
  rep.metrics = metrics_for(options.family);

  std::map<std::pair<Method, int>, RunGroups> groups;
  std::set<Method> seen_methods;
  std::set<int> seen_states;
  for (const auto& r : records) {
    seen_methods.insert(r.method);
    seen_states.insert(r.state_t);
    auto& cov = rep.coverage[{r.method, r.state_t}];
    if (!r.ok()) {
      ++cov.failed;
      ++rep.diagnostics.failed_records;
      continue;
    }
    ++cov.records;
    groups[{r.method, r.state_t}][r.run_index].push_back(&r);
  }
  for (auto& [key, runs] : groups) {
    for (auto& [run, list] : runs) std::sort(list.begin(), list.end(), canonical_less);
  }

  rep.methods = options.methods;
  if (rep.methods.empty()) rep.methods.assign(seen_methods.begin(), seen_methods.end());
  rep.states = options.states;
  if (rep.states.empty()) rep.states.assign(seen_states.begin(), seen_states.end());
  std::sort(rep.states.begin(), rep.states.end());

  for (Method m : rep.methods) {
    for (int s : rep.states) {
      const auto git = groups.find({m, s});
      for (MetricId id : rep.metrics) {
        MetricCell cell;
        if (git != groups.end()) {
          double sum = 0.0;
          for (const auto& [run, list] : git->second) {
            const auto rv = run_metric(id, list, options.human_techniques, rep.diagnostics);
            if (!rv.value) continue;
            sum += *rv.value;
            ++cell.n_runs;
            cell.n_samples += rv.samples;
          }
          if (cell.n_runs > 0) cell.value = sum / static_cast<double>(cell.n_runs);
        }
        rep.cells[{m, s, id}] = cell;
      }
    }
  }

  std::vector<std::string> missing;
  for (Method m : rep.methods) {
    for (int s : rep.states) {
      const bool has_baseline = groups.count({options.baseline, s}) > 0;
      if (m != options.baseline && groups.count({m, s}) > 0 && !has_baseline) {
        missing.push_back(std::string(to_string(options.baseline)) + " @ state " +
                          std::to_string(s) + " (needed by " + to_string(m) + ")");
      }
      for (MetricId id : rep.metrics) {
        auto& cell = rep.cells[{m, s, id}];
        if (!cell.value) {
          cell.pct.undefined_reason = "no-value";
          continue;
        }
        if (m == options.baseline) {
          cell.pct.value = 0.0;
          continue;
        }
        const auto bit = rep.cells.find({options.baseline, s, id});
        if (!has_baseline || bit == rep.cells.end() || !bit->second.value) {
          cell.pct.undefined_reason = "missing-baseline";
          continue;
        }
        try {
          cell.pct.value = pct_diff(*cell.value, *bit->second.value);
        } catch (const UndefinedMetricError&) {
          cell.pct.undefined_reason = "zero-baseline";
        }
      }
    }
  }
  if (options.require_baseline && !missing.empty()) {
    std::string msg = "missing baseline cells:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ReportError(msg);
  }
  return rep;
}

std::string to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "method,state,metric,value,pct_diff,n_samples\n";
  for (Method m : report.methods) {
    for (int s : report.states) {
      for (MetricId id : report.metrics) {
        const auto& c = report.cell(m, s, id);
        out << to_string(m) << ',' << s << ',' << to_string(id) << ','
            << (c.value ? fmt(*c.value) : std::string("NA")) << ','
            << (c.pct.value ? fmt(*c.pct.value) : "undefined:" + c.pct.undefined_reason) << ','
            << c.n_samples << '\n';
      }
    }
  }
  return out.str();
}

std::string plot_data(const MetricReport& report, MetricId metric) {
  if (std::find(report.metrics.begin(), report.metrics.end(), metric) == report.metrics.end()) {
    throw ReportError(std::string("metric ") + to_string(metric) + " is not part of this report");
  }
  std::ostringstream out;
  out << "# pct_diff vs " << to_string(report.baseline) << " for " << to_string(metric) << '\n';
  out << "# state";
  for (Method m : report.methods) out << ' ' << to_string(m);
  out << '\n';
  for (int s : report.states) {
    out << s;
    for (Method m : report.methods) {
      const auto& c = report.cell(m, s, metric);
      out << ' ' << (c.pct.value ? fmt(*c.pct.value) : std::string("NaN"));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace crelab::metrics
