#include "crelab/mitigate/cove.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/keyvalue.hpp"

#include <cctype>

namespace crelab::mitigate {

namespace {

// Strips a list marker; returns false when the line is not a list item.
bool strip_marker(const std::string& line, std::string& item) {
  std::size_t i = 0;
  if (line.empty()) return false;
  if (line[0] == '-' || line[0] == '*' || line[0] == '+') {
    i = 1;
  } else {
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) return false;
    ++i;
  }
  if (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) return false;
  item = trim(std::string_view(line).substr(i));
  return !item.empty();
}

std::string call_stage(Generator& gen, int stage, GenerationRequest req) {
  try {
    return gen.complete(req);
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

std::string numbered(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += std::to_string(i + 1) + ". " + items[i] + "\n";
  }
  return out;
}

}  // namespace

std::vector<std::string> parse_list_items(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& raw : split(text, '\n')) {
    std::string item;
    if (strip_marker(trim(raw), item)) out.push_back(std::move(item));
  }
  return out;
}

std::string format_qa(const std::vector<std::string>& questions,
                      const std::vector<std::string>& answers) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const std::string n = std::to_string(i + 1);
    out += "Q" + n + ": " + questions[i] + "\n";
    out += "A" + n + ": " + (i < answers.size() ? answers[i] : std::string()) + "\n";
  }
  return out;
}

CoVeTranscript cove_run(std::string_view problem, Generator& generator,
                        const TemplateSet& templates, const CoVeOptions& options) {
  CoVeTranscript t;
  const std::string prob(problem);
  auto request = [&](std::string prompt, Purpose purpose, std::uint64_t salt,
                     std::size_t items = 0) {
    GenerationRequest r;
    r.prompt = std::move(prompt);
    r.seed = hash_combine(options.seed, salt);
    r.purpose = purpose;
    r.expected_items = items;
    r.strategy = options.strategy;
    return r;
  };

  t.stage_prompts.push_back(templates.cove_draft.render({{"problem", prob}}));
  t.draft = call_stage(generator, 1, request(t.stage_prompts[0], Purpose::cove_draft, 1));
  ++t.generator_calls;

  t.stage_prompts.push_back(
      templates.cove_questions.render({{"problem", prob}, {"draft", t.draft}}));
  const std::string q_reply =
      call_stage(generator, 2, request(t.stage_prompts[1], Purpose::cove_questions, 2));
  ++t.generator_calls;
  t.verification_questions = parse_list_items(q_reply);
  if (t.verification_questions.empty()) {
    throw PipelineError(2, "no numbered or bulleted verification questions in reply");
  }
  const std::size_t nq = t.verification_questions.size();

  if (options.per_question) {
    std::string joined;
    for (std::size_t i = 0; i < nq; ++i) {
      const std::string prompt = templates.cove_answer_one.render(
          {{"problem", prob}, {"draft", t.draft}, {"question", t.verification_questions[i]}});
      if (i) joined += "\n";
      joined += prompt;
      const std::string ans =
          call_stage(generator, 3, request(prompt, Purpose::cove_answers, 100 + i, 1));
      ++t.generator_calls;
      t.verification_answers.push_back(trim(ans));
    }
    t.stage_prompts.push_back(joined);
  } else {
    t.stage_prompts.push_back(templates.cove_answers.render(
        {{"problem", prob}, {"draft", t.draft}, {"questions", numbered(t.verification_questions)}}));
    const std::string a_reply =
        call_stage(generator, 3, request(t.stage_prompts[2], Purpose::cove_answers, 3, nq));
    ++t.generator_calls;
    t.verification_answers = parse_list_items(a_reply);
    if (t.verification_answers.size() != nq) {
      if (nq == 1 && !trim(a_reply).empty()) {
        t.verification_answers = {trim(a_reply)};
      } else {
        throw PipelineError(3, "expected " + std::to_string(nq) + " answers, parsed " +
                                   std::to_string(t.verification_answers.size()));
      }
    }
  }

  t.stage_prompts.push_back(templates.cove_final.render(
      {{"problem", prob},
       {"draft", t.draft},
       {"qa", format_qa(t.verification_questions, t.verification_answers)}}));
  t.final_text = call_stage(generator, 4, request(t.stage_prompts[3], Purpose::cove_final, 4));
  ++t.generator_calls;
  return t;
}

}  // namespace crelab::mitigate
