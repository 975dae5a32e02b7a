#include "crelab/harness/probe_pipeline.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/decode/generate.hpp"
#include "crelab/metrics/metrics.hpp"
#include "crelab/probes/train.hpp"
#include "crelab/tinylm/tokenizer.hpp"

#include <map>

namespace crelab::harness {

namespace {

double score_techniques(const std::set<std::string>& techniques, const std::set<std::string>& human) {
  return techniques.empty() ? 0.0 : metrics::divergent_ratio(techniques, human);
}

}  // namespace

const std::vector<std::string>& builtin_probe_prompts() {
  static const std::vector<std::string> prompts = {
      "use a ", "solve it by ", "we apply ", "try ", "first ", "use a hash map with ",
      "solve it by recursion and then ", "try sorting, not ",
  };
  return prompts;
}

const std::set<std::string>& builtin_reference_techniques() {
  static const std::set<std::string> ref = {"for-loop", "recursion", "hash-map", "dynamic-programming",
                                            "two-pointers", "stack", "bfs", "bit-manipulation"};
  return ref;
}

std::vector<probes::ProbeSource> bootstrap_probe_sources(const tinylm::Model& model,
                                                         const decode::DecodeConfig& base,
                                                         mitigate::Judge& judge,
                                                         const std::vector<std::string>& prompts,
                                                         const std::set<std::string>& reference,
                                                         const ProbeBootstrapOptions& options) {
  if (prompts.empty()) throw InputError("probe bootstrap needs at least one prompt");
  decode::DecodeConfig cfg = base;
  cfg.strategy = decode::Strategy::baseline;
  cfg.max_new_tokens = options.max_new_tokens;
  decode::GenerateOptions gen_opts;
  gen_opts.keep_steps = false;
  std::vector<probes::ProbeSource> out;
  out.reserve(options.samples);
  for (std::size_t i = 0; i < options.samples; ++i) {
    probes::ProbeSource src;
    src.prompt = prompts[i % prompts.size()];
    cfg.rng_seed = hash_combine(options.seed, i);
    std::vector<tinylm::Token> tokens{tinylm::Tokenizer::kBos};
    const auto body = tinylm::Tokenizer::encode(src.prompt);
    tokens.insert(tokens.end(), body.begin(), body.end());
    src.output = decode::generate(model, tokens, cfg, gen_opts).text;
    src.divergent_score = score_techniques(judge.extract_techniques(src.output), reference);
    out.push_back(std::move(src));
  }
  return out;
}

std::vector<probes::ProbeSource> sources_from_records(
    const std::vector<metrics::GenerationRecord>& records, const Dataset& dataset,
    metrics::Method method) {
  std::map<std::string, const ProblemSpec*> by_id;
  for (const auto& p : dataset.problems) by_id[p.id] = &p;
  std::vector<probes::ProbeSource> out;
  for (const auto& r : records) {
    if (!r.ok() || r.method != method) continue;
    const auto it = by_id.find(r.problem_id);
    if (it == by_id.end()) throw DatasetError("record refers to unknown problem '" + r.problem_id + "'");
    probes::ProbeSource src;
    src.prompt = build_prompt(*it->second, dataset.kind, r.state_t);
    src.output = r.output_text;
    src.divergent_score = score_techniques(r.techniques, it->second->human_techniques);
    out.push_back(std::move(src));
  }
  if (out.empty()) {
    throw DatasetError(std::string("no successful ") + metrics::to_string(method) + " records");
  }
  return out;
}

probes::ProbeReport run_probe_pipeline(const tinylm::Model& model,
                                       const std::vector<probes::ProbeSource>& sources,
                                       const ProbePipelineOptions& options) {
  const auto ds = probes::build_probe_dataset(sources, model, options.conditioning_fraction);
  const auto trained = probes::train_head_probes(ds, options.split_seed, {}, options.threads);
  return probes::make_report(trained.head_scores, ds.geometry, model.id());
}

}  // namespace crelab::harness
