#include "crelab/mitigate/generator.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/tinylm/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace crelab::mitigate {

namespace {

constexpr std::array<const char*, 16> kMockTechniques = {
    "for loop",    "while loop",   "recursion",        "binary search",
    "hash map",    "sorting",      "dynamic programming", "greedy",
    "two pointers", "prefix sum",  "stack",            "queue",
    "bfs",         "dfs",          "bit manipulation", "math"};

constexpr std::array<const char*, 5> kMockVerbs = {"use", "apply", "combine", "try", "build on"};

std::vector<std::string> quoted_phrases(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find('"', pos);
    if (open == std::string::npos) break;
    const auto close = text.find('"', open + 1);
    if (close == std::string::npos) break;
    if (close > open + 1) out.push_back(text.substr(open + 1, close - open - 1));
    pos = close + 1;
  }
  return out;
}

std::string mock_prose(const GenerationRequest& req, Rng& rng) {
  std::string out;
  const std::size_t sentences = 2 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < sentences; ++i) {
    const char* verb = kMockVerbs[uniform_index(rng, kMockVerbs.size())];
    const char* a = kMockTechniques[uniform_index(rng, kMockTechniques.size())];
    const char* b = kMockTechniques[uniform_index(rng, kMockTechniques.size())];
    out += std::string(verb) + " " + a + " together with " + b + " on step " +
           std::to_string(i + 1) + ".\n";
  }
  for (const auto& phrase : quoted_phrases(req.prompt)) {
    if (uniform01(rng) < 0.6) out += "It features " + phrase + ".\n";
  }
  out += std::to_string(uniform_index(rng, 4));
  return out;
}

}  // namespace

const char* to_string(Purpose p) noexcept {
  switch (p) {
    case Purpose::plain: return "plain";
    case Purpose::cove_draft: return "cove_draft";
    case Purpose::cove_questions: return "cove_questions";
    case Purpose::cove_answers: return "cove_answers";
    case Purpose::cove_final: return "cove_final";
    case Purpose::rag: return "rag";
    case Purpose::judge_techniques: return "judge_techniques";
    case Purpose::judge_constraints: return "judge_constraints";
    case Purpose::judge_coherence: return "judge_coherence";
  }
  return "plain";
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::string> replies, bool cycle)
    : replies_(std::move(replies)), cycle_(cycle) {}

void ScriptedGenerator::fail_at(std::size_t call) {
  std::lock_guard lock(mu_);
  fail_at_ = call;
}

std::string ScriptedGenerator::complete(const GenerationRequest& request) {
  std::lock_guard lock(mu_);
  seen_.push_back(request);
  const std::size_t call = seen_.size();
  if (fail_at_ != 0 && call == fail_at_) {
    throw BackendError("scripted failure at call " + std::to_string(call));
  }
  if (next_ >= replies_.size()) {
    if (!cycle_ || replies_.empty()) {
      throw BackendError("scripted generator exhausted after " + std::to_string(replies_.size()) +
                         " replies");
    }
    next_ = 0;
  }
  return replies_[next_++];
}

std::size_t ScriptedGenerator::calls() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::vector<GenerationRequest> ScriptedGenerator::requests() const {
  std::lock_guard lock(mu_);
  return seen_;
}

std::string RuleMockGenerator::complete(const GenerationRequest& req) {
  Rng rng(hash_combine(fnv1a64(req.prompt), hash_combine(req.seed, static_cast<int>(req.purpose))));
  std::string out;
  switch (req.purpose) {
    case Purpose::cove_questions: {
      const std::size_t n = 2 + uniform_index(rng, 2);
      for (std::size_t i = 1; i <= n; ++i) {
        out += std::to_string(i) + ". Does step " + std::to_string(i) + " rely on " +
               kMockTechniques[uniform_index(rng, kMockTechniques.size())] + "?\n";
      }
      return out;
    }
    case Purpose::cove_answers:
      for (std::size_t i = 1; i <= std::max<std::size_t>(req.expected_items, 1); ++i) {
        out += std::to_string(i) + ". " + (uniform01(rng) < 0.5 ? "Yes" : "No") +
               ", checked against the draft.\n";
      }
      return out;
    case Purpose::judge_techniques:
      return kMockTechniques[uniform_index(rng, kMockTechniques.size())];
    case Purpose::judge_constraints:
      for (std::size_t i = 1; i <= req.expected_items; ++i) {
        out += std::to_string(i) + ": " + (uniform01(rng) < 0.5 ? "yes" : "no") + "\n";
      }
      return out;
    case Purpose::judge_coherence:
      return std::to_string(1 + uniform_index(rng, 5));
    default:
      return mock_prose(req, rng);
  }
}

LocalModelGenerator::LocalModelGenerator(std::shared_ptr<const tinylm::Model> model,
                                         decode::DecodeConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
  if (!model_) throw ConfigError("local generator needs a model");
  config_.validate(model_->config().n_layers);
}

std::string LocalModelGenerator::complete(const GenerationRequest& request) {
  decode::DecodeConfig cfg = config_;
  cfg.rng_seed = request.seed;
  if (request.strategy) cfg.strategy = *request.strategy;
  std::vector<tinylm::Token> prompt{tinylm::Tokenizer::kBos};
  const auto body = tinylm::Tokenizer::encode(request.prompt);
  prompt.insert(prompt.end(), body.begin(), body.end());
  decode::GenerateOptions opts;
  opts.keep_steps = false;
  return decode::generate(*model_, prompt, cfg, opts).text;
}

}  // namespace crelab::mitigate
