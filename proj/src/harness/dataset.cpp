#include "crelab/harness/dataset.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/mitigate/judge.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace crelab::harness {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key)) throw LoadError(line, std::string("missing field '") + key + "'");
  return j.at(key);
}

std::string require_string(const json& j, const char* key, std::size_t line, bool non_empty) {
  const json& v = require(j, key, line);
  if (!v.is_string()) throw LoadError(line, std::string("field '") + key + "' must be a string");
  std::string s = v.get<std::string>();
  if (non_empty && s.empty()) throw LoadError(line, std::string("field '") + key + "' is empty");
  return s;
}

std::vector<std::string> string_array(const json& v, const std::string& what, std::size_t line) {
  if (!v.is_array()) throw LoadError(line, what + " must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw LoadError(line, what + " must contain strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<std::string> normalized(const std::vector<std::string>& raw, const std::string& what,
                                    std::size_t line) {
  std::vector<std::string> out;
  for (const auto& r : raw) {
    std::string t = mitigate::normalize_technique(r);
    if (t.empty()) throw LoadError(line, what + " contains an empty technique");
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

ProblemSpec parse_neocoder(const json& j, std::size_t line) {
  ProblemSpec p;
  p.id = require_string(j, "id", line, true);
  p.statement = require_string(j, "statement", line, true);
  const json& cs = require(j, "constraints", line);
  if (!cs.is_array()) throw LoadError(line, "constraints must be an array of arrays");
  for (std::size_t t = 0; t < cs.size(); ++t) {
    const std::string what = "constraints for state " + std::to_string(t + 1);
    p.constraints_by_state.push_back(normalized(string_array(cs[t], what, line), what, line));
  }
  for (std::size_t t = 1; t < p.constraints_by_state.size(); ++t) {
    const auto& prev = p.constraints_by_state[t - 1];
    const auto& cur = p.constraints_by_state[t];
    for (const auto& c : prev) {
      if (std::find(cur.begin(), cur.end(), c) == cur.end()) {
        throw LoadError(line, "constraints are not cumulative: state " + std::to_string(t + 1) +
                                  " drops '" + c + "' from state " + std::to_string(t));
      }
    }
  }
  const auto human = normalized(string_array(require(j, "human_techniques", line),
                                             "human_techniques", line),
                                "human_techniques", line);
  p.human_techniques.insert(human.begin(), human.end());
  const json& tests = require(j, "tests", line);
  if (!tests.is_array()) throw LoadError(line, "tests must be an array");
  for (const auto& t : tests) {
    if (!t.is_object()) throw LoadError(line, "each test must be an object");
    TestCase tc;
    tc.input = require_string(t, "input", line, false);
    tc.expected = require_string(t, "expected", line, false);
    p.tests.push_back(std::move(tc));
  }
  return p;
}

ProblemSpec parse_cs4(const json& j, std::size_t line) {
  ProblemSpec p;
  p.id = require_string(j, "id", line, true);
  p.statement = require_string(j, "instruction", line, true);
  p.constraint_pool = string_array(require(j, "constraints", line), "constraints", line);
  if (p.constraint_pool.empty()) throw LoadError(line, "constraints is empty");
  for (const auto& c : p.constraint_pool) {
    if (c.empty()) throw LoadError(line, "constraints contains an empty string");
  }
  if (!j.contains("base_story")) throw LoadError(line, "missing field 'base_story'");
  p.base_story = require_string(j, "base_story", line, true);
  return p;
}

}  // namespace

const char* to_string(DatasetKind k) noexcept { return k == DatasetKind::neocoder ? "neocoder" : "cs4"; }

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "neocoder" || text == "neocoder-like") return DatasetKind::neocoder;
  if (text == "cs4" || text == "cs4-like") return DatasetKind::cs4;
  throw ConfigError("unknown dataset kind '" + std::string(text) + "' (expected neocoder or cs4)");
}

std::vector<std::string> ProblemSpec::constraints_at(int state) const {
  if (state < 0 || state > max_state()) {
    throw IndexError("problem " + id + " has no state " + std::to_string(state) + " (max " +
                     std::to_string(max_state()) + ")");
  }
  if (state == 0) return {};
  if (!constraint_pool.empty()) {
    return {constraint_pool.begin(), constraint_pool.begin() + state};
  }
  return constraints_by_state[static_cast<std::size_t>(state - 1)];
}

int ProblemSpec::max_state() const {
  return static_cast<int>(constraint_pool.empty() ? constraints_by_state.size()
                                                  : constraint_pool.size());
}

Dataset parse_dataset(std::string_view text, DatasetKind kind) {
  Dataset ds;
  ds.kind = kind;
  ds.content_hash = fnv1a64(text);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw LoadError(line_no, "not a JSON object");
    ProblemSpec p = kind == DatasetKind::neocoder ? parse_neocoder(j, line_no) : parse_cs4(j, line_no);
    if (!ids.insert(p.id).second) throw LoadError(line_no, "duplicate problem id '" + p.id + "'");
    ds.problems.push_back(std::move(p));
  }
  if (ds.problems.empty()) throw LoadError(0, "dataset has no problems");
  return ds;
}

Dataset load_dataset(const std::string& path, DatasetKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), kind);
}

metrics::HumanTechniques human_techniques(const Dataset& dataset) {
  metrics::HumanTechniques out;
  for (const auto& p : dataset.problems) out[p.id] = p.human_techniques;
  return out;
}

std::string build_prompt(const ProblemSpec& p, DatasetKind kind, int state) {
  const auto constraints = p.constraints_at(state);
  std::string out;
  if (kind == DatasetKind::neocoder) {
    out = p.statement + "\n";
    for (const auto& t : p.tests) out += "Input: " + t.input + "\n";
    if (!constraints.empty()) {
      out += "Do not use these techniques:";
      for (std::size_t i = 0; i < constraints.size(); ++i) {
        out += (i ? ", \"" : " \"") + constraints[i] + "\"";
      }
      out += ".\n";
    }
    out += "Explain the solution, then give only the final answer on the last line.\n";
    return out;
  }
  out = "Revise the story so that it follows the instruction";
  out += constraints.empty() ? ".\n" : " and satisfies every constraint.\n";
  out += "\nInstruction: " + p.statement + "\n";
  if (!constraints.empty()) {
    out += "\nConstraints:\n";
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      out += std::to_string(i + 1) + ". " + constraints[i] + "\n";
    }
  }
  out += "\nStory:\n" + p.base_story + "\n";
  return out;
}

}  // namespace crelab::harness
