#include "crelab/decode/scores.hpp"

#include "crelab/common/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crelab::decode {

double jsd(std::span<const float> p, std::span<const float> q) {
  if (p.size() != q.size()) {
    throw InputError("jsd: length mismatch (" + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()) + ")");
  }
  double kl_pm = 0.0;
  double kl_qm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p[i];
    const double qi = q[i];
    const double m = 0.5 * (pi + qi);
    if (pi > 0.0) kl_pm += pi * std::log2(pi / m);
    if (qi > 0.0) kl_qm += qi * std::log2(qi / m);
  }
  return std::clamp(0.5 * (kl_pm + kl_qm), 0.0, 1.0);
}

int select_premature_layer(const tinylm::LayerTrace& trace, std::span<const int> candidates) {
  if (candidates.empty()) throw ConfigError("select_premature_layer: empty candidate set");
  const int n = trace.n_layers();
  std::vector<int> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end());
  for (int c : sorted) {
    if (c < 1 || c >= n) {
      throw ConfigError("premature-layer candidate " + std::to_string(c) + " outside 1.." +
                        std::to_string(n - 1));
    }
  }
  const auto final_dist = trace.final_dist();
  int best = sorted.front();
  double best_div = -1.0;
  for (int c : sorted) {
    const double div = jsd(trace.q(c), final_dist);
    if (div > best_div) {
      best_div = div;
      best = c;
    }
  }
  return best;
}

std::vector<int> head_filter(std::span<const float> q_final, float beta) {
  if (!(beta > 0.0f && beta <= 1.0f)) throw ConfigError("beta must lie in (0, 1]");
  if (q_final.empty()) throw InputError("head_filter: empty distribution");
  const float threshold = beta * *std::max_element(q_final.begin(), q_final.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < q_final.size(); ++i) {
    if (q_final[i] >= threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

inline float floored_log(float p) { return std::log(std::max(p, kProbFloor)); }

}  // namespace

StepScores baseline_scores(const tinylm::LayerTrace& trace) {
  const auto q = trace.final_dist();
  StepScores s;
  s.raw_scores.resize(q.size());
  s.v_head.resize(q.size());
  std::iota(s.v_head.begin(), s.v_head.end(), 0);
  for (std::size_t i = 0; i < q.size(); ++i) s.raw_scores[i] = floored_log(q[i]);
  return s;
}

StepScores dola_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config) {
  const auto q_final = trace.final_dist();
  StepScores s;
  s.v_head = head_filter(q_final, config.beta);
  const std::vector<int> cands = config.resolved_candidates(trace.n_layers());
  s.premature_layer = select_premature_layer(trace, cands);
  const auto q_early = trace.q(s.premature_layer);
  s.raw_scores.assign(q_final.size(), kNegInf);
  for (int x : s.v_head) {
    const auto i = static_cast<std::size_t>(x);
    s.raw_scores[i] = std::log(std::max(q_final[i], kProbFloor) / std::max(q_early[i], kProbFloor));
  }
  return s;
}

namespace detail {

StepScores creative_dola_scores_unchecked(const tinylm::LayerTrace& trace,
                                          const DecodeConfig& config, bool with_diagnostics) {
  StepScores s = dola_scores(trace, config);
  if (config.alpha == 0.0f) return s;

  const int n = trace.n_layers();
  for (const auto* set : {&config.set_A, &config.set_B}) {
    for (int l : *set) {
      if (l < 1 || l > n) throw ConfigError("layer set entry " + std::to_string(l) + " out of range");
    }
  }

  std::vector<float> amplified(s.raw_scores.size(), 0.0f);
  std::vector<float> suppressed(s.raw_scores.size(), 0.0f);
  for (int a : config.set_A) {
    const auto q = trace.q(a);
    const float g = config.gamma_for(a);
    std::vector<float>* diag = with_diagnostics ? &s.per_layer_contributions[a] : nullptr;
    if (diag) diag->assign(q.size(), 0.0f);
    for (int x : s.v_head) {
      const auto i = static_cast<std::size_t>(x);
      const float term = g * floored_log(q[i]);
      amplified[i] += term;
      if (diag) (*diag)[i] += term;
    }
  }
  for (int b : config.set_B) {
    const auto q = trace.q(b);
    const float g = config.gamma_for(b);
    std::vector<float>* diag = with_diagnostics ? &s.per_layer_contributions[b] : nullptr;
    if (diag) diag->assign(q.size(), 0.0f);
    for (int x : s.v_head) {
      const auto i = static_cast<std::size_t>(x);
      const float term = g * floored_log(q[i]);
      suppressed[i] += term;
      if (diag) (*diag)[i] -= term;
    }
  }
  for (int x : s.v_head) {
    const auto i = static_cast<std::size_t>(x);
    s.raw_scores[i] += config.alpha * (amplified[i] - suppressed[i]);
  }
  return s;
}

}  // namespace detail

StepScores creative_dola_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config,
                                bool with_diagnostics) {
  if (!(config.alpha >= 0.0f)) throw ConfigError("alpha must be >= 0");
  for (int a : config.set_A) {
    if (std::find(config.set_B.begin(), config.set_B.end(), a) != config.set_B.end()) {
      throw ConfigError("set_A and set_B overlap at layer " + std::to_string(a));
    }
  }
  return detail::creative_dola_scores_unchecked(trace, config, with_diagnostics);
}

StepScores step_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config) {
  switch (config.strategy) {
    case Strategy::baseline: return baseline_scores(trace);
    case Strategy::dola: return dola_scores(trace, config);
    case Strategy::creative_dola: return creative_dola_scores(trace, config);
  }
  throw InternalError("unknown strategy");
}

tinylm::Token sample_next(const StepScores& scores, float temperature, float top_p,
                          bool do_sample, Rng& rng) {
  const auto& raw = scores.raw_scores;
  std::vector<int> finite;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (std::isfinite(raw[i])) finite.push_back(static_cast<int>(i));
  }
  if (finite.empty()) throw InternalError("sample_next: no finite score (V_head invariant broken)");

  if (!do_sample) {
    int best = finite.front();
    for (int i : finite) {
      if (raw[static_cast<std::size_t>(i)] > raw[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
  }
  if (!(temperature > 0.0f)) throw ConfigError("temperature must be > 0");
  if (!(top_p > 0.0f && top_p <= 1.0f)) throw ConfigError("top_p must lie in (0, 1]");

  double mx = -std::numeric_limits<double>::infinity();
  for (int i : finite) mx = std::max(mx, static_cast<double>(raw[static_cast<std::size_t>(i)]));
  std::vector<double> weight(finite.size());
  double total = 0.0;
  for (std::size_t k = 0; k < finite.size(); ++k) {
    weight[k] = std::exp((raw[static_cast<std::size_t>(finite[k])] - mx) / temperature);
    total += weight[k];
  }

  std::vector<std::size_t> order(finite.size());
  std::iota(order.begin(), order.end(), 0);
  if (top_p < 1.0f) {
    std::stable_sort(order.begin(), order.end(),
                     [&weight](std::size_t a, std::size_t b) { return weight[a] > weight[b]; });
    double cumulative = 0.0;
    std::size_t keep = 0;
    while (keep < order.size()) {
      cumulative += weight[order[keep]];
      ++keep;
      if (cumulative >= static_cast<double>(top_p) * total) break;
    }
    order.resize(keep);
    total = cumulative;
  }

  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t k : order) {
    acc += weight[k];
    if (target < acc) return finite[k];
  }
  return finite[order.back()];
}

}  // namespace crelab::decode
