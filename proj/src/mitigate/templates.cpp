#include "crelab/mitigate/templates.hpp"

#include "crelab/common/error.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace crelab::mitigate {

namespace {

constexpr const char* k_cove_draft = R"tmpl(Solve the following task.

{problem}
)tmpl";

constexpr const char* k_cove_questions = R"tmpl(Task:
{problem}

Draft answer:
{draft}

Write verification questions that check the draft for mistakes or unmet constraints.
Give one question per line as a numbered list.
)tmpl";

constexpr const char* k_cove_answers = R"tmpl(Task:
{problem}

Draft answer:
{draft}

Answer each verification question on its own numbered line, in the same order.
{questions}
)tmpl";

constexpr const char* k_cove_answer_one = R"tmpl(Task:
{problem}

Draft answer:
{draft}

Answer this verification question briefly.
{question}
)tmpl";

constexpr const char* k_cove_final = R"tmpl(Task:
{problem}

Draft answer:
{draft}

Verification questions and answers:
{qa}

Write the final, corrected response to the task using the verification results.
)tmpl";

constexpr const char* k_rag = R"tmpl(Reference material:
{context}

{problem}
)tmpl";

constexpr const char* k_judge_techniques = R"tmpl(List the programming techniques used in the solution below, one per line, lowercase, without explanations.
Reply with the single word none if there are none.

Solution:
{output}
)tmpl";

constexpr const char* k_judge_constraints = R"tmpl(For each numbered constraint reply with one line "<number>: yes" if the story satisfies it, or "<number>: no" otherwise.

Constraints:
{constraints}

Story:
{story}
)tmpl";

constexpr const char* k_judge_coherence = R"tmpl(Compare the story with the reference story and rate the coherence of the story from 1 (incoherent) to 5 (fully coherent).
Reply with a single integer.

Reference story:
{reference}

Story:
{story}
)tmpl";

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls fn(start, end, name) for each {name} occurrence; end is one past '}'.
template <typename Fn>
void for_each_placeholder(const std::string& text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && is_placeholder_char(text[j])) ++j;
    if (j < text.size() && text[j] == '}' && j > i + 1) {
      fn(i, j + 1, text.substr(i + 1, j - i - 1));
      i = j + 1;
    } else {
      ++i;
    }
  }
}

void check(const Template& t, std::set<std::string> allowed) {
  const std::set<std::string> required = allowed;
  t.validate(allowed, required);
}

}  // namespace

Template::Template(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {}

std::set<std::string> Template::placeholders() const {
  std::set<std::string> out;
  for_each_placeholder(text_, [&](std::size_t, std::size_t, std::string n) { out.insert(std::move(n)); });
  return out;
}

void Template::validate(const std::set<std::string>& allowed,
                        const std::set<std::string>& required) const {
  const auto present = placeholders();
  for (const auto& p : present) {
    if (!allowed.count(p)) {
      throw ConfigError("template " + name_ + ": unknown placeholder {" + p + "}");
    }
  }
  for (const auto& r : required) {
    if (!present.count(r)) {
      throw ConfigError("template " + name_ + ": missing placeholder {" + r + "}");
    }
  }
}

std::string Template::render(const std::map<std::string, std::string>& values) const {
  std::string out;
  std::size_t last = 0;
  for_each_placeholder(text_, [&](std::size_t start, std::size_t end, const std::string& n) {
    const auto it = values.find(n);
    if (it == values.end()) {
      throw ConfigError("template " + name_ + ": no value for {" + n + "}");
    }
    out.append(text_, last, start - last);
    out += it->second;
    last = end;
  });
  out.append(text_, last, std::string::npos);
  return out;
}

void TemplateSet::validate() const {
  check(cove_draft, {"problem"});
  check(cove_questions, {"problem", "draft"});
  check(cove_answers, {"problem", "draft", "questions"});
  check(cove_answer_one, {"problem", "draft", "question"});
  check(cove_final, {"problem", "draft", "qa"});
  check(rag, {"context", "problem"});
  check(judge_techniques, {"output"});
  check(judge_constraints, {"story", "constraints"});
  check(judge_coherence, {"story", "reference"});
}

const std::vector<std::string>& template_names() {
  static const std::vector<std::string> names = {
      "cove_draft", "cove_questions",   "cove_answers",      "cove_answer_one", "cove_final",
      "rag",        "judge_techniques", "judge_constraints", "judge_coherence"};
  return names;
}

namespace {

Template* slot(TemplateSet& s, const std::string& name) {
  if (name == "cove_draft") return &s.cove_draft;
  if (name == "cove_questions") return &s.cove_questions;
  if (name == "cove_answers") return &s.cove_answers;
  if (name == "cove_answer_one") return &s.cove_answer_one;
  if (name == "cove_final") return &s.cove_final;
  if (name == "rag") return &s.rag;
  if (name == "judge_techniques") return &s.judge_techniques;
  if (name == "judge_constraints") return &s.judge_constraints;
  if (name == "judge_coherence") return &s.judge_coherence;
  return nullptr;
}

}  // namespace

TemplateSet default_templates() {
  TemplateSet s;
  s.cove_draft = Template("cove_draft", k_cove_draft);
  s.cove_questions = Template("cove_questions", k_cove_questions);
  s.cove_answers = Template("cove_answers", k_cove_answers);
  s.cove_answer_one = Template("cove_answer_one", k_cove_answer_one);
  s.cove_final = Template("cove_final", k_cove_final);
  s.rag = Template("rag", k_rag);
  s.judge_techniques = Template("judge_techniques", k_judge_techniques);
  s.judge_constraints = Template("judge_constraints", k_judge_constraints);
  s.judge_coherence = Template("judge_coherence", k_judge_coherence);
  return s;
}

TemplateSet load_templates(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("template directory '" + dir + "' does not exist");
  TemplateSet s = default_templates();
  for (const auto& name : template_names()) {
    const fs::path p = fs::path(dir) / (name + ".txt");
    if (!fs::exists(p)) continue;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read template '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    *slot(s, name) = Template(name, ss.str());
  }
  s.validate();
  return s;
}

}  // namespace crelab::mitigate
