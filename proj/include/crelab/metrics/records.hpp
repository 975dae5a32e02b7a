#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::metrics {

enum class Method { baseline, cove, dola, creative_dola, rag };

const char* to_string(Method m) noexcept;
Method parse_method(std::string_view text);
const std::vector<Method>& all_methods();

enum class Verdict { correct, incorrect, unknown };

const char* to_string(Verdict v) noexcept;
Verdict parse_verdict(std::string_view text);

struct JudgeScores {
  std::optional<int> coherence;  // 1..5
  std::optional<int> satisfied;  // satisfied constraint count
  std::optional<int> total;      // constraints judged

  bool operator==(const JudgeScores&) const = default;
};

/// One generation attempt for (problem, state, method, run).
struct GenerationRecord {
  std::string problem_id;
  int state_t = 0;
  Method method = Method::baseline;
  int run_index = 1;
  std::uint64_t seed = 0;
  std::string output_text;
  std::set<std::string> techniques;
  std::set<std::string> constraints_violated;  // techniques ∩ active constraints
  Verdict verdict = Verdict::unknown;
  JudgeScores judge;
  std::string error;  // non-empty marks a failed attempt

  bool ok() const { return error.empty(); }
  bool operator==(const GenerationRecord&) const = default;
};

}  // namespace crelab::metrics
