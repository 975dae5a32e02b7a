#pragma once

#include "crelab/common/rng.hpp"
#include "crelab/decode/config.hpp"
#include "crelab/tinylm/model.hpp"

#include <limits>
#include <map>
#include <span>
#include <vector>

namespace crelab::decode {

/// Floor applied to probabilities before taking logs.
inline constexpr float kProbFloor = 1e-10f;
inline constexpr float kNegInf = -std::numeric_limits<float>::infinity();

struct StepScores {
  std::vector<float> raw_scores;  // log-domain, -inf outside v_head
  std::vector<int> v_head;        // ascending token ids
  int premature_layer = 0;        // 0 when no contrast was applied
  /// Optional: per-layer signed contribution gamma*log q over v_head
  /// (negated for anti-correlated layers).
  std::map<int, std::vector<float>> per_layer_contributions;
};

/// Jensen-Shannon divergence in bits; 0 <= jsd <= 1.
double jsd(std::span<const float> p, std::span<const float> q);

/// argmax_j JSD(q_j, q_N) over the candidates; lowest index wins ties.
int select_premature_layer(const tinylm::LayerTrace& trace, std::span<const int> candidates);

/// {x : q_N(x) >= beta * max_w q_N(w)}, ascending.
std::vector<int> head_filter(std::span<const float> q_final, float beta);

/// log q_N over the full vocabulary.
StepScores baseline_scores(const tinylm::LayerTrace& trace);

/// log(q_N / q_M) on V_head, -inf elsewhere.
StepScores dola_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config);

/// DoLa plus alpha * (sum_A gamma_a log q_a - sum_B gamma_b log q_b) on V_head.
StepScores creative_dola_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config,
                                bool with_diagnostics = false);

StepScores step_scores(const tinylm::LayerTrace& trace, const DecodeConfig& config);

/// Softmax over finite scores at `temperature`, nucleus-truncated at top_p,
/// then sampled; greedy takes the argmax with lowest-id tie-break.
tinylm::Token sample_next(const StepScores& scores, float temperature, float top_p,
                          bool do_sample, Rng& rng);

namespace detail {
/// creative_dola_scores without the A/B disjointness check. For tests.
StepScores creative_dola_scores_unchecked(const tinylm::LayerTrace& trace,
                                          const DecodeConfig& config, bool with_diagnostics);
}  // namespace detail

}  // namespace crelab::decode
