#include "crelab/mitigate/judge.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/keyvalue.hpp"
#include "crelab/mitigate/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace crelab::mitigate {

namespace {

constexpr const char* kBuiltinLexicon = R"lex(# technique: pattern | pattern ...
# Patterns match case-insensitively on word boundaries.
for-loop: for loop | for-loop | for each | for i in
while-loop: while loop | while-loop
recursion: recursion | recursive | recursively
binary-search: binary search | bisect
hash-map: hash map | hashmap | hash table | dictionary | dict
sorting: sorting | sort | sorted
dynamic-programming: dynamic programming | memoization | memoize | dp table
greedy: greedy
two-pointers: two pointers | two pointer | two-pointer
prefix-sum: prefix sum | prefix sums | cumulative sum
stack: stack
queue: queue | deque
bfs: bfs | breadth-first search | breadth first search
dfs: dfs | depth-first search | depth first search
bit-manipulation: bit manipulation | bitwise | xor
math: math | arithmetic | modulo
list-comprehension: list comprehension
string-slicing: string slicing | slice
)lex";

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool contains_word(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]) || !is_word_char(needle.front());
    const std::size_t end = pos + needle.size();
    const bool right_ok =
        end == haystack.size() || !is_word_char(haystack[end]) || !is_word_char(needle.back());
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::string strip_list_marker(const std::string& line) {
  std::size_t i = 0;
  if (!line.empty() && (line[0] == '-' || line[0] == '*' || line[0] == '+')) {
    i = 1;
  } else {
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
      ++i;
    } else {
      i = 0;
    }
  }
  return trim(std::string_view(line).substr(i));
}

std::size_t word_count(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

}  // namespace

std::string normalize_technique(std::string_view text) {
  std::string s = lower(trim(text));
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back())) && s.back() != '+' &&
         s.back() != '#') {
    s.pop_back();
  }
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      gap = !out.empty();
      continue;
    }
    if (gap) out.push_back('-');
    gap = false;
    out.push_back(c);
  }
  return out;
}

Lexicon Lexicon::parse(std::string_view text) {
  Lexicon lex;
  std::size_t line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw LoadError(line_no, "lexicon line needs 'technique: patterns'");
    const std::string tech = normalize_technique(line.substr(0, colon));
    if (tech.empty()) throw LoadError(line_no, "empty technique name");
    std::vector<std::string> patterns;
    for (const auto& p : split(std::string_view(line).substr(colon + 1), '|')) {
      const std::string pat = lower(trim(p));
      if (!pat.empty()) patterns.push_back(pat);
    }
    if (patterns.empty()) throw LoadError(line_no, "technique '" + tech + "' has no patterns");
    lex.entries.emplace_back(tech, std::move(patterns));
  }
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read lexicon '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

Lexicon Lexicon::builtin() { return parse(kBuiltinLexicon); }

RuleBasedJudge::RuleBasedJudge(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

std::set<std::string> RuleBasedJudge::extract_techniques(std::string_view output) {
  std::set<std::string> found;
  const std::string text = lower(output);
  for (const auto& [tech, patterns] : lexicon_.entries) {
    for (const auto& p : patterns) {
      if (contains_word(text, p)) {
        found.insert(tech);
        break;
      }
    }
  }
  return found;
}

std::string constraint_marker(std::string_view constraint) {
  const auto open = constraint.find('"');
  if (open != std::string_view::npos) {
    const auto close = constraint.find('"', open + 1);
    if (close != std::string_view::npos && close > open + 1) {
      return std::string(constraint.substr(open + 1, close - open - 1));
    }
  }
  return trim(constraint);
}

ConstraintJudgement RuleBasedJudge::judge_constraints(std::string_view story,
                                                      const std::vector<std::string>& constraints) {
  if (constraints.empty()) throw InputError("judge_constraints needs at least one constraint");
  const std::string text = lower(story);
  ConstraintJudgement j;
  for (const auto& c : constraints) {
    const std::string marker = lower(constraint_marker(c));
    const bool ok = !marker.empty() && text.find(marker) != std::string::npos;
    j.per_constraint.push_back(ok);
    j.satisfied += ok;
  }
  return j;
}

CoherenceJudgement RuleBasedJudge::judge_coherence(std::string_view story,
                                                   std::string_view reference) {
  const auto a_terms = tokenize_terms(story);
  const auto b_terms = tokenize_terms(reference);
  const std::set<std::string> a(a_terms.begin(), a_terms.end());
  const std::set<std::string> b(b_terms.begin(), b_terms.end());
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  const std::size_t uni = a.size() + b.size() - inter;
  CoherenceJudgement j;
  const double jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  j.score = 1 + static_cast<int>(std::lround(4.0 * jaccard));
  return j;
}

std::set<std::string> parse_technique_reply(const std::string& reply) {
  std::set<std::string> out;
  for (const auto& raw : split(reply, '\n')) {
    const std::string item = strip_list_marker(trim(raw));
    if (item.empty()) continue;
    if (lower(item) == "none") continue;
    if (item.size() > 60 || word_count(item) > 6) {
      throw JudgeError("technique reply line is not a technique name: '" + item + "'", reply);
    }
    const std::string t = normalize_technique(item);
    if (!t.empty()) out.insert(t);
  }
  return out;
}

std::vector<bool> parse_constraint_reply(const std::string& reply, std::size_t expected) {
  static const std::regex numbered(R"(^\s*(\d+)\s*[:.)\-]\s*(yes|no)\b.*$)", std::regex::icase);
  static const std::regex bare(R"(^\s*(?:[-*+]\s*)?(yes|no)\b.*$)", std::regex::icase);
  std::vector<int> slots(expected, -1);
  std::vector<bool> sequential;
  bool any_numbered = false;
  for (const auto& raw : split(reply, '\n')) {
    std::smatch m;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (std::regex_match(line, m, numbered)) {
      any_numbered = true;
      const auto idx = std::stoul(m[1].str());
      if (idx < 1 || idx > expected) {
        throw JudgeError("constraint number " + m[1].str() + " out of range", reply);
      }
      if (slots[idx - 1] != -1) throw JudgeError("constraint " + m[1].str() + " judged twice", reply);
      slots[idx - 1] = lower(m[2].str()) == "yes";
    } else if (std::regex_match(line, m, bare)) {
      sequential.push_back(lower(m[1].str()) == "yes");
    }
  }
  std::vector<bool> out;
  if (any_numbered) {
    if (!sequential.empty()) throw JudgeError("mixed numbered and bare verdicts", reply);
    for (int s : slots) {
      if (s < 0) throw JudgeError("constraint reply is missing verdicts", reply);
      out.push_back(s == 1);
    }
    return out;
  }
  if (sequential.size() != expected) {
    throw JudgeError("expected " + std::to_string(expected) + " verdicts, parsed " +
                         std::to_string(sequential.size()),
                     reply);
  }
  return sequential;
}

CoherenceJudgement parse_coherence_reply(const std::string& reply) {
  static const std::regex number(R"(-?\d+)");
  std::smatch m;
  if (!std::regex_search(reply, m, number)) throw JudgeError("no coherence score in reply", reply);
  long v = 0;
  try {
    v = std::stol(m.str());
  } catch (const std::exception&) {
    throw JudgeError("coherence score out of integer range", reply);
  }
  CoherenceJudgement j;
  j.score = static_cast<int>(std::clamp<long>(v, 1, 5));
  if (j.score != v) {
    j.clamped = true;
    j.warning = "coherence score " + m.str() + " clamped to " + std::to_string(j.score);
  }
  return j;
}

GeneratorJudge::GeneratorJudge(Generator& generator, TemplateSet templates)
    : generator_(generator), templates_(std::move(templates)) {
  templates_.validate();
}

std::string GeneratorJudge::ask(std::string prompt, Purpose purpose, std::size_t items) {
  GenerationRequest req;
  req.seed = fnv1a64(prompt);
  req.prompt = std::move(prompt);
  req.purpose = purpose;
  req.expected_items = items;
  return generator_.complete(req);
}

std::set<std::string> GeneratorJudge::extract_techniques(std::string_view output) {
  if (trim(output).empty()) return {};
  return parse_technique_reply(ask(templates_.judge_techniques.render({{"output", std::string(output)}}),
                                   Purpose::judge_techniques, 0));
}

ConstraintJudgement GeneratorJudge::judge_constraints(std::string_view story,
                                                      const std::vector<std::string>& constraints) {
  if (constraints.empty()) throw InputError("judge_constraints needs at least one constraint");
  std::string listed;
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    listed += std::to_string(i + 1) + ". " + constraints[i] + "\n";
  }
  const std::string reply =
      ask(templates_.judge_constraints.render({{"story", std::string(story)}, {"constraints", listed}}),
          Purpose::judge_constraints, constraints.size());
  ConstraintJudgement j;
  j.per_constraint = parse_constraint_reply(reply, constraints.size());
  j.satisfied = static_cast<int>(std::count(j.per_constraint.begin(), j.per_constraint.end(), true));
  return j;
}

CoherenceJudgement GeneratorJudge::judge_coherence(std::string_view story,
                                                   std::string_view reference) {
  return parse_coherence_reply(ask(templates_.judge_coherence.render(
                                       {{"story", std::string(story)},
                                        {"reference", std::string(reference)}}),
                                   Purpose::judge_coherence, 0));
}

}  // namespace crelab::mitigate
