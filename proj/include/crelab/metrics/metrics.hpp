#pragma once

#include "crelab/metrics/records.hpp"

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::metrics {

/// Reference techniques seen in human solutions, per problem id.
using HumanTechniques = std::map<std::string, std::set<std::string>>;

struct MetricValue {
  double value = 0.0;
  std::size_t n_samples = 0;   // records that entered the mean
  std::size_t n_excluded = 0;  // records skipped (unknown verdict, empty technique set)
};

/// Fraction of records that are correct and use no constrained technique.
/// Records with an unknown verdict are excluded and counted. All records must
/// share one state. Throws UndefinedMetricError when nothing remains.
MetricValue neocoder_convergent(std::span<const GenerationRecord> records);

/// |T \ T_human| / |T| for one record; throws UndefinedMetricError on empty T.
double divergent_ratio(const std::set<std::string>& techniques,
                       const std::set<std::string>& human);

/// Mean divergent ratio; records with no techniques are excluded and counted.
MetricValue neocoder_divergent(std::span<const GenerationRecord> records,
                               const HumanTechniques& human);

double constraint_satisfaction(int satisfied, int total);

/// mean_score / 5 for a mean coherence score in [1, 5].
double coherence_norm(double mean_score);

/// Lowercased, punctuation-stripped, whitespace-delimited words.
std::vector<std::string> ngram_tokens(std::string_view text);

/// Product over n in [n_min, n_max] of unique/total n-gram ratios.
double dist_n(std::string_view text, int n_min = 2, int n_max = 4);

double quc(double coherence_normalized, double satisfaction);

/// (method - baseline) / baseline * 100. Throws UndefinedMetricError on a
/// zero baseline.
double pct_diff(double method_value, double baseline_value);

}  // namespace crelab::metrics
