#pragma once

#include "crelab/harness/dataset.hpp"
#include "crelab/metrics/records.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace crelab::harness {

class CorrectnessChecker {
 public:
  virtual ~CorrectnessChecker() = default;
  virtual metrics::Verdict check(const ProblemSpec& problem, std::string_view output) = 0;
  virtual std::string name() const = 0;
};

/// Last non-empty line of `text`, trimmed.
std::string final_line(std::string_view text);

/// Correct when the final line equals every test's expected output (both
/// trimmed); unknown when the problem has no tests.
class ExactMatchChecker final : public CorrectnessChecker {
 public:
  metrics::Verdict check(const ProblemSpec& problem, std::string_view output) override;
  std::string name() const override { return "exact"; }
};

/// Runs a shell command with {output_file} and {problem_id} substituted.
/// Exit 0 is correct, 1 incorrect, anything else unknown.
class CommandChecker final : public CorrectnessChecker {
 public:
  explicit CommandChecker(std::string command_template);
  metrics::Verdict check(const ProblemSpec& problem, std::string_view output) override;
  std::string name() const override { return "command"; }

 private:
  std::string command_;
};

class UnknownChecker final : public CorrectnessChecker {
 public:
  metrics::Verdict check(const ProblemSpec&, std::string_view) override {
    return metrics::Verdict::unknown;
  }
  std::string name() const override { return "unknown"; }
};

/// "exact", "unknown" or "command:<template>".
std::unique_ptr<CorrectnessChecker> make_checker(std::string_view spec);

}  // namespace crelab::harness
