#include "crelab/harness/checker.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/keyvalue.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace crelab::harness {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string final_line(std::string_view text) {
  const auto lines = split(text, '\n');
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string t = trim(*it);
    if (!t.empty()) return t;
  }
  return {};
}

metrics::Verdict ExactMatchChecker::check(const ProblemSpec& problem, std::string_view output) {
  if (problem.tests.empty()) return metrics::Verdict::unknown;
  const std::string answer = final_line(output);
  for (const auto& t : problem.tests) {
    if (answer != trim(t.expected)) return metrics::Verdict::incorrect;
  }
  return metrics::Verdict::correct;
}

CommandChecker::CommandChecker(std::string command_template) : command_(std::move(command_template)) {
  if (trim(command_).empty()) throw ConfigError("command checker needs a command");
}

metrics::Verdict CommandChecker::check(const ProblemSpec& problem, std::string_view output) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned long> counter{0};
  const fs::path file = fs::temp_directory_path() /
                        ("crelab-check-" + std::to_string(::getpid()) + "-" +
                         std::to_string(counter++) + ".txt");
  {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checker input '" + file.string() + "'");
    out << output;
  }
  std::string cmd = command_;
  replace_all(cmd, "{output_file}", shell_quote(file.string()));
  replace_all(cmd, "{problem_id}", shell_quote(problem.id));
  const int status = std::system(cmd.c_str());
  std::error_code ec;
  fs::remove(file, ec);
  if (status == -1 || !WIFEXITED(status)) return metrics::Verdict::unknown;
  switch (WEXITSTATUS(status)) {
    case 0: return metrics::Verdict::correct;
    case 1: return metrics::Verdict::incorrect;
    default: return metrics::Verdict::unknown;
  }
}

std::unique_ptr<CorrectnessChecker> make_checker(std::string_view spec) {
  if (spec == "exact") return std::make_unique<ExactMatchChecker>();
  if (spec == "unknown") return std::make_unique<UnknownChecker>();
  constexpr std::string_view prefix = "command:";
  if (spec.substr(0, prefix.size()) == prefix) {
    return std::make_unique<CommandChecker>(std::string(spec.substr(prefix.size())));
  }
  throw ConfigError("unknown checker '" + std::string(spec) +
                    "' (expected exact, unknown or command:<template>)");
}

}  // namespace crelab::harness
