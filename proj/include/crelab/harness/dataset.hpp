#pragma once

#include "crelab/metrics/metrics.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::harness {

enum class DatasetKind { neocoder, cs4 };

const char* to_string(DatasetKind k) noexcept;
DatasetKind parse_dataset_kind(std::string_view text);

struct TestCase {
  std::string input;
  std::string expected;
};

struct ProblemSpec {
  std::string id;
  std::string statement;  // neocoder statement or cs4 instruction
  /// neocoder: cumulative sets for states 1..T (normalized technique names).
  std::vector<std::vector<std::string>> constraints_by_state;
  /// cs4: the full ordered constraint list; state t uses the first t.
  std::vector<std::string> constraint_pool;
  std::set<std::string> human_techniques;
  std::vector<TestCase> tests;
  std::string base_story;

  /// Active constraints at `state`; state 0 has none. Throws IndexError
  /// beyond max_state().
  std::vector<std::string> constraints_at(int state) const;
  int max_state() const;
};

struct Dataset {
  DatasetKind kind = DatasetKind::neocoder;
  std::vector<ProblemSpec> problems;
  std::uint64_t content_hash = 0;  // FNV-1a of the file bytes
};

/// JSON lines, one problem per line.
///   neocoder: {id, statement, constraints: [[...], ...], human_techniques: [...],
///              tests: [{input, expected}, ...]}
///   cs4:      {id, instruction, constraints: [...], base_story}
/// Schema and invariant violations raise LoadError with the line number.
Dataset parse_dataset(std::string_view text, DatasetKind kind);
Dataset load_dataset(const std::string& path, DatasetKind kind);

metrics::HumanTechniques human_techniques(const Dataset& dataset);

/// The generation prompt for a problem at a state.
std::string build_prompt(const ProblemSpec& problem, DatasetKind kind, int state);

}  // namespace crelab::harness
