#pragma once

#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/templates.hpp"

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace crelab::mitigate {

/// Lowercase, trimmed, inner whitespace and underscores collapsed to '-',
/// trailing punctuation removed. "Binary  Search." -> "binary-search".
std::string normalize_technique(std::string_view text);

struct ConstraintJudgement {
  int satisfied = 0;
  std::vector<bool> per_constraint;
};

struct CoherenceJudgement {
  int score = 1;
  bool clamped = false;
  std::string warning;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::set<std::string> extract_techniques(std::string_view output) = 0;
  /// Throws InputError on an empty constraint list.
  virtual ConstraintJudgement judge_constraints(std::string_view story,
                                                const std::vector<std::string>& constraints) = 0;
  virtual CoherenceJudgement judge_coherence(std::string_view story,
                                             std::string_view reference) = 0;
  virtual std::string name() const = 0;
};

/// technique -> surface patterns, matched case-insensitively on word
/// boundaries.
struct Lexicon {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;

  /// Lines of `technique: pattern | pattern`; '#' starts a comment.
  static Lexicon parse(std::string_view text);
  static Lexicon load(const std::string& path);
  static Lexicon builtin();
};

/// Offline judge. Techniques by lexicon lookup; a constraint is satisfied
/// when its marker (the first double-quoted span, else the whole constraint)
/// occurs in the story; coherence is 1 + round(4 * word-set Jaccard) against
/// the reference.
class RuleBasedJudge final : public Judge {
 public:
  explicit RuleBasedJudge(Lexicon lexicon = Lexicon::builtin());

  std::set<std::string> extract_techniques(std::string_view output) override;
  ConstraintJudgement judge_constraints(std::string_view story,
                                        const std::vector<std::string>& constraints) override;
  CoherenceJudgement judge_coherence(std::string_view story, std::string_view reference) override;
  std::string name() const override { return "rule"; }

 private:
  Lexicon lexicon_;
};

/// Marker text used for substring constraint checks.
std::string constraint_marker(std::string_view constraint);

/// Asks a generator with the judge templates and parses its replies.
class GeneratorJudge final : public Judge {
 public:
  GeneratorJudge(Generator& generator, TemplateSet templates);

  std::set<std::string> extract_techniques(std::string_view output) override;
  ConstraintJudgement judge_constraints(std::string_view story,
                                        const std::vector<std::string>& constraints) override;
  CoherenceJudgement judge_coherence(std::string_view story, std::string_view reference) override;
  std::string name() const override { return "generator:" + generator_.name(); }

 private:
  std::string ask(std::string prompt, Purpose purpose, std::size_t items);

  Generator& generator_;
  TemplateSet templates_;
};

// Reply parsers, exposed for tests. All throw JudgeError with the raw reply.
std::set<std::string> parse_technique_reply(const std::string& reply);
std::vector<bool> parse_constraint_reply(const std::string& reply, std::size_t expected);
CoherenceJudgement parse_coherence_reply(const std::string& reply);

}  // namespace crelab::mitigate
