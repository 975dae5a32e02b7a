#include "crelab/decode/generate.hpp"

#include "crelab/common/error.hpp"

#include <algorithm>

namespace crelab::decode {

GenerationResult generate(const tinylm::Model& model, std::span<const tinylm::Token> prompt,
                          const DecodeConfig& config, const GenerateOptions& options) {
  const tinylm::ModelConfig& mc = model.config();
  config.validate(mc.n_layers);
  if (prompt.empty()) throw InputError("generate: empty prompt");
  if (config.strategy == Strategy::creative_dola && !config.probe_model_id.empty() &&
      config.probe_model_id != model.id()) {
    throw ConfigError("probe report was built for model " + config.probe_model_id +
                      ", refusing to decode with model " + model.id());
  }

  std::optional<tinylm::Token> eos = options.eos;
  if (!eos && tinylm::Tokenizer::kEos < mc.vocab_size) eos = tinylm::Tokenizer::kEos;

  Rng rng(config.rng_seed);
  std::vector<tinylm::Token> context(prompt.begin(), prompt.end());
  const auto window = static_cast<std::size_t>(mc.max_seq_len);
  GenerationResult result;
  for (std::size_t step = 0; step < config.max_new_tokens; ++step) {
    const std::size_t start = context.size() > window ? context.size() - window : 0;
    tinylm::LayerTrace trace = model.forward(std::span(context).subspan(start));
    trace.step_index = step;
    StepScores scores = step_scores(trace, config);
    const tinylm::Token next =
        sample_next(scores, config.temperature, config.top_p, config.do_sample, rng);
    if (options.keep_steps) result.steps.push_back(std::move(scores));
    if (eos && next == *eos) break;
    context.push_back(next);
    result.tokens.push_back(next);
  }
  result.text = tinylm::Tokenizer::decode(result.tokens);
  return result;
}

}  // namespace crelab::decode
