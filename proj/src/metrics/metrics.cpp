#include "crelab/metrics/metrics.hpp"

#include "crelab/common/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

namespace crelab::metrics {

namespace {

constexpr const char* kMethodNames[] = {"baseline", "cove", "dola", "creative_dola", "rag"};

}  // namespace

const char* to_string(Method m) noexcept { return kMethodNames[static_cast<int>(m)]; }

Method parse_method(std::string_view text) {
  for (Method m : all_methods()) {
    if (text == to_string(m)) return m;
  }
  if (text == "creative-dola") return Method::creative_dola;
  throw ConfigError("unknown method '" + std::string(text) +
                    "' (expected baseline, cove, dola, creative_dola or rag)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::baseline, Method::cove, Method::dola,
                                           Method::creative_dola, Method::rag};
  return methods;
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::correct: return "correct";
    case Verdict::incorrect: return "incorrect";
    case Verdict::unknown: return "unknown";
  }
  return "unknown";
}

Verdict parse_verdict(std::string_view text) {
  if (text == "correct") return Verdict::correct;
  if (text == "incorrect") return Verdict::incorrect;
  if (text == "unknown") return Verdict::unknown;
  throw InputError("unknown verdict '" + std::string(text) + "'");
}

MetricValue neocoder_convergent(std::span<const GenerationRecord> records) {
  if (records.empty()) throw UndefinedMetricError("convergent metric over an empty record set");
  const int state = records.front().state_t;
  MetricValue out;
  std::size_t hits = 0;
  for (const auto& r : records) {
    if (r.state_t != state) {
      throw InputError("convergent metric needs records from one state, got " +
                       std::to_string(state) + " and " + std::to_string(r.state_t));
    }
    if (r.verdict == Verdict::unknown) {
      ++out.n_excluded;
      continue;
    }
    ++out.n_samples;
    if (r.verdict == Verdict::correct && r.constraints_violated.empty()) ++hits;
  }
  if (out.n_samples == 0) {
    throw UndefinedMetricError("convergent metric: every record has an unknown verdict");
  }
  out.value = static_cast<double>(hits) / static_cast<double>(out.n_samples);
  return out;
}

double divergent_ratio(const std::set<std::string>& techniques, const std::set<std::string>& human) {
  if (techniques.empty()) throw UndefinedMetricError("divergent ratio of an empty technique set");
  std::size_t novel = 0;
  for (const auto& t : techniques) novel += human.count(t) == 0;
  return static_cast<double>(novel) / static_cast<double>(techniques.size());
}

MetricValue neocoder_divergent(std::span<const GenerationRecord> records,
                               const HumanTechniques& human) {
  if (records.empty()) throw UndefinedMetricError("divergent metric over an empty record set");
  static const std::set<std::string> kNone;
  MetricValue out;
  double sum = 0.0;
  for (const auto& r : records) {
    if (r.techniques.empty()) {
      ++out.n_excluded;
      continue;
    }
    const auto it = human.find(r.problem_id);
    sum += divergent_ratio(r.techniques, it == human.end() ? kNone : it->second);
    ++out.n_samples;
  }
  if (out.n_samples == 0) {
    throw UndefinedMetricError("divergent metric: every record has an empty technique set");
  }
  out.value = sum / static_cast<double>(out.n_samples);
  return out;
}

double constraint_satisfaction(int satisfied, int total) {
  if (total <= 0) throw UndefinedMetricError("constraint satisfaction with zero constraints");
  if (satisfied < 0 || satisfied > total) {
    throw InputError("satisfied count " + std::to_string(satisfied) + " outside [0, " +
                     std::to_string(total) + "]");
  }
  return static_cast<double>(satisfied) / static_cast<double>(total);
}

double coherence_norm(double mean_score) {
  if (!(mean_score >= 1.0 && mean_score <= 5.0)) {
    throw InputError("coherence score outside [1, 5]");
  }
  return mean_score / 5.0;
}

std::vector<std::string> ngram_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double dist_n(std::string_view text, int n_min, int n_max) {
  if (n_min < 1 || n_max < n_min) throw ConfigError("dist_n: bad n range");
  const auto tokens = ngram_tokens(text);
  const auto len = static_cast<int>(tokens.size());
  if (len < n_max) {
    throw UndefinedMetricError("dist_n: text has " + std::to_string(len) + " words, needs " +
                               std::to_string(n_max));
  }
  double product = 1.0;
  for (int n = n_min; n <= n_max; ++n) {
    std::unordered_set<std::string> unique;
    const int total = len - n + 1;
    for (int i = 0; i < total; ++i) {
      std::string key;
      for (int k = 0; k < n; ++k) {
        key += tokens[static_cast<std::size_t>(i + k)];
        key += '\x1f';
      }
      unique.insert(std::move(key));
    }
    product *= static_cast<double>(unique.size()) / static_cast<double>(total);
  }
  return product;
}

double quc(double coherence_normalized, double satisfaction) {
  if (!(coherence_normalized >= 0.0 && coherence_normalized <= 1.0) ||
      !(satisfaction >= 0.0 && satisfaction <= 1.0)) {
    throw InputError("quc inputs must lie in [0, 1]");
  }
  return coherence_normalized * satisfaction;
}

double pct_diff(double method_value, double baseline_value) {
  if (baseline_value == 0.0) throw UndefinedMetricError("undefined delta: zero baseline");
  return (method_value - baseline_value) / baseline_value * 100.0;
}

}  // namespace crelab::metrics
