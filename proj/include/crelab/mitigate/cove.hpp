#pragma once

#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/templates.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::mitigate {

struct CoVeOptions {
  /// Ask each verification question in its own call instead of one batch.
  bool per_question = false;
  std::uint64_t seed = 0;
  std::optional<decode::Strategy> strategy;
};

struct CoVeTranscript {
  std::string draft;
  std::vector<std::string> verification_questions;
  std::vector<std::string> verification_answers;
  std::string final_text;
  /// Draft, questions, answers and final prompts in order. In per-question
  /// mode the third entry joins every per-question prompt with a blank line.
  std::vector<std::string> stage_prompts;
  std::size_t generator_calls = 0;
};

/// Items of a numbered ("1." / "1)") or bulleted ("-", "*", "+") list, in
/// order. Other lines are ignored.
std::vector<std::string> parse_list_items(std::string_view text);

/// "Q1: ...\nA1: ...\n" for each pair.
std::string format_qa(const std::vector<std::string>& questions,
                      const std::vector<std::string>& answers);

/// Draft, verification questions, answers, final response. Any generator
/// failure becomes a PipelineError carrying the 1-based stage.
CoVeTranscript cove_run(std::string_view problem, Generator& generator,
                        const TemplateSet& templates, const CoVeOptions& options = {});

}  // namespace crelab::mitigate
