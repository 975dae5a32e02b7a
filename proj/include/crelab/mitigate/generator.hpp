#pragma once

#include "crelab/decode/config.hpp"
#include "crelab/decode/generate.hpp"
#include "crelab/tinylm/model.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace crelab::mitigate {

/// What a request is for. Mocks use it to shape replies; real backends ignore it.
enum class Purpose {
  plain,
  cove_draft,
  cove_questions,
  cove_answers,
  cove_final,
  rag,
  judge_techniques,
  judge_constraints,
  judge_coherence,
};

const char* to_string(Purpose p) noexcept;

struct GenerationRequest {
  std::string prompt;
  std::uint64_t seed = 0;
  Purpose purpose = Purpose::plain;
  /// Number of list items the caller expects back (answers, constraint verdicts).
  std::size_t expected_items = 0;
  /// Decoding strategy override for backends that decode locally.
  std::optional<decode::Strategy> strategy;
};

/// Text-in, text-out backend. Implementations must be safe to call from
/// several threads at once.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string complete(const GenerationRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Ordered canned replies. Throws BackendError once exhausted, or at the
/// call index given to fail_at (1-based).
class ScriptedGenerator final : public Generator {
 public:
  explicit ScriptedGenerator(std::vector<std::string> replies, bool cycle = false);

  void fail_at(std::size_t call);
  std::string complete(const GenerationRequest& request) override;
  std::string name() const override { return "scripted"; }

  std::size_t calls() const;
  std::vector<GenerationRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  bool cycle_;
  std::size_t next_ = 0;
  std::size_t fail_at_ = 0;
  std::vector<GenerationRequest> seen_;
};

/// Replies with the prompt itself.
class EchoGenerator final : public Generator {
 public:
  std::string complete(const GenerationRequest& request) override { return request.prompt; }
  std::string name() const override { return "echo"; }
};

/// Deterministic offline stand-in for a chat model. Replies depend only on
/// (prompt, seed, purpose, expected_items): numbered lists for CoVe stages,
/// yes/no lists and scores for judges, short technique-flavoured prose with a
/// final answer line otherwise.
class RuleMockGenerator final : public Generator {
 public:
  std::string complete(const GenerationRequest& request) override;
  std::string name() const override { return "mock"; }
};

/// Decodes with a toy model. The prompt is byte-encoded after BOS; the
/// request seed becomes the sampling seed.
class LocalModelGenerator final : public Generator {
 public:
  LocalModelGenerator(std::shared_ptr<const tinylm::Model> model, decode::DecodeConfig config);

  std::string complete(const GenerationRequest& request) override;
  std::string name() const override { return "local"; }

  const decode::DecodeConfig& config() const { return config_; }
  const tinylm::Model& model() const { return *model_; }

 private:
  std::shared_ptr<const tinylm::Model> model_;
  decode::DecodeConfig config_;
};

}  // namespace crelab::mitigate
