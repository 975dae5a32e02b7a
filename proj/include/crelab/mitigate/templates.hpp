#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crelab::mitigate {

/// Plain text with `{name}` placeholders (lowercase letters and underscores).
/// Other braces are copied through.
class Template {
 public:
  Template() = default;
  Template(std::string name, std::string text);

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }
  std::set<std::string> placeholders() const;

  /// Throws ConfigError for a placeholder outside `allowed` or a missing
  /// `required` one.
  void validate(const std::set<std::string>& allowed, const std::set<std::string>& required) const;

  /// Throws ConfigError when a placeholder has no value.
  std::string render(const std::map<std::string, std::string>& values) const;

 private:
  std::string name_;
  std::string text_;
};

struct TemplateSet {
  Template cove_draft;       // {problem}
  Template cove_questions;   // {problem} {draft}
  Template cove_answers;     // {problem} {draft} {questions}
  Template cove_answer_one;  // {problem} {draft} {question}
  Template cove_final;       // {problem} {draft} {qa}
  Template rag;              // {context} {problem}
  Template judge_techniques;   // {output}
  Template judge_constraints;  // {story} {constraints}
  Template judge_coherence;    // {story} {reference}

  void validate() const;
};

/// Names of the template files, without the .txt suffix.
const std::vector<std::string>& template_names();

/// Built-in templates; identical to the files shipped in data/templates.
TemplateSet default_templates();

/// Reads `<dir>/<name>.txt` for each template name; files that do not exist
/// keep the built-in text. The result is validated.
TemplateSet load_templates(const std::string& dir);

}  // namespace crelab::mitigate
