#include "crelab/common/error.hpp"
#include "crelab/common/keyvalue.hpp"
#include "crelab/decode/generate.hpp"
#include "crelab/harness/backends.hpp"
#include "crelab/harness/dataset.hpp"
#include "crelab/harness/emit.hpp"
#include "crelab/harness/plan.hpp"
#include "crelab/harness/probe_pipeline.hpp"
#include "crelab/harness/records.hpp"
#include "crelab/harness/runner.hpp"
#include "crelab/mitigate/retrieval.hpp"
#include "crelab/probes/report.hpp"
#include "crelab/tinylm/tokenizer.hpp"
#include "crelab/tinylm/train.hpp"
#include "crelab/tinylm/weights_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

using namespace crelab;

namespace {

// Key/value flags shared with the plain-text config format. Flags given on the
// command line override the --config file.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::string config_path;

  void add(CLI::App& app, const std::vector<std::string>& keys) {
    for (const auto& k : keys) {
      if (options.count(k)) continue;
      options[k] = app.add_option("--" + k, values[k], "see README: " + k);
    }
  }

  KeyValues collect() const {
    KeyValues kv = config_path.empty() ? KeyValues() : KeyValues::load(config_path);
    for (const auto& [k, opt] : options) {
      if (opt->count() > 0) kv.set(k, values.at(k));
    }
    return kv;
  }
};

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return 1;
    case ErrorKind::backend:
    case ErrorKind::pipeline:
    case ErrorKind::judge:
    case ErrorKind::internal: return 3;
    default: return 2;
  }
}

std::vector<std::string> decode_keys() { return decode::decode_config_keys(); }

int cmd_train_toy(const std::string& out, std::size_t steps, std::size_t lines,
                  const std::string& corpus_file, tinylm::ModelConfig mc,
                  tinylm::TrainOptions opt, std::size_t log_every) {
  mc.validate();
  tinylm::Corpus corpus;
  if (corpus_file.empty()) {
    corpus = tinylm::synthetic_corpus(opt.seed, lines);
  } else {
    std::ifstream in(corpus_file, std::ios::binary);
    if (!in) throw IoError("cannot read corpus '" + corpus_file + "'");
    std::string line;
    while (std::getline(in, line)) {
      if (!trim(line).empty()) corpus.push_back(tinylm::Tokenizer::encode(line));
    }
  }
  opt.steps = steps;
  const tinylm::Corpus held(corpus.begin(), corpus.begin() + std::min<std::size_t>(corpus.size(), 200));
  const tinylm::Model init = tinylm::Model::init(mc);
  const double before = tinylm::mean_cross_entropy(init, held, opt.seq_len);
  const auto t0 = std::chrono::steady_clock::now();
  tinylm::TrainLog log;
  const tinylm::Model trained = tinylm::train_toy(init, corpus, opt, &log);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log_every > 0) {
    for (std::size_t i = 0; i < log.step_losses.size(); i += log_every) {
      std::fprintf(stderr, "step %zu loss %.4f\n", i + 1, static_cast<double>(log.step_losses[i]));
    }
  }
  const double after = tinylm::mean_cross_entropy(trained, held, opt.seq_len);
  tinylm::save_model(trained, out);
  std::printf("model %s\nparameters %zu\nloss (first 200 lines) %.4f -> %.4f\nsteps %zu in %.1f s\nsaved %s\n",
              trained.id().c_str(), trained.weights().parameter_count(), before, after, opt.steps,
              secs, out.c_str());
  return 0;
}

int cmd_decode(const std::string& model_path, const std::vector<std::string>& prompts,
               const std::string& probe_report, const KeyFlags& flags, bool trace) {
  const tinylm::Model model = tinylm::load_model(model_path);
  decode::DecodeConfig cfg;
  const KeyValues kv = flags.collect();
  const auto& keys = decode::decode_config_keys();
  kv.require_known({keys.begin(), keys.end()});
  if (!probe_report.empty()) {
    probes::apply_probe_report(probes::load_probe_report(probe_report), model.id(), cfg);
  }
  decode::apply_decode_keys(kv, cfg);
  if (cfg.strategy == decode::Strategy::creative_dola && (cfg.set_A.empty() || cfg.set_B.empty())) {
    throw ConfigError("creative_dola needs layer sets: pass --probe_report or --set_A/--set_B");
  }
  for (const auto& p : prompts) {
    std::vector<tinylm::Token> tokens{tinylm::Tokenizer::kBos};
    const auto body = tinylm::Tokenizer::encode(p);
    tokens.insert(tokens.end(), body.begin(), body.end());
    decode::GenerateOptions go;
    go.keep_steps = trace;
    const auto res = decode::generate(model, tokens, cfg, go);
    std::cout << p << res.text << '\n';
    if (trace) {
      for (std::size_t i = 0; i < res.steps.size(); ++i) {
        std::fprintf(stderr, "step %zu premature_layer %d head_size %zu\n", i,
                     res.steps[i].premature_layer, res.steps[i].v_head.size());
      }
    }
  }
  return 0;
}

harness::ExperimentPlan plan_from(const KeyFlags& flags) {
  const KeyValues kv = flags.collect();
  std::set<std::string> known(harness::plan_keys().begin(), harness::plan_keys().end());
  for (const auto& k : decode::decode_config_keys()) known.insert(k);
  kv.require_known(known);
  harness::ExperimentPlan plan;
  harness::apply_plan_keys(kv, plan);
  return plan;
}

int cmd_run(const KeyFlags& flags) {
  const auto plan = plan_from(flags);
  plan.validate();
  const auto dataset = harness::load_dataset(plan.dataset, plan.kind);
  auto backends = harness::make_backends(plan);
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = harness::run_experiment(plan, dataset, backends.view, &std::cerr);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& s = result.summary;
  std::printf("cells %zu resumed %zu executed %zu failed %zu (%.1f s)\n", s.total, s.resumed,
              s.executed, s.failed, secs);
  if (!s.complete) {
    std::printf("stopped before the last cell; rerun the same command to resume\n");
    return 0;
  }
  harness::EmitContext ctx{&plan, &dataset, backends.model_id, backends.probe_model_id};
  for (const auto& f : harness::emit_outputs(ctx, *result.report, result.records, plan.out)) {
    std::printf("wrote %s/%s\n", plan.out.c_str(), f.c_str());
  }
  return 0;
}

int cmd_report(const KeyFlags& flags, const std::string& records_path, bool strict) {
  const auto plan = plan_from(flags);
  if (plan.out.empty()) throw ConfigError("report needs --out");
  if (plan.dataset.empty()) throw ConfigError("report needs --dataset");
  const auto dataset = harness::load_dataset(plan.dataset, plan.kind);
  const std::string path = records_path.empty() ? plan.out + "/" + harness::kArchiveName : records_path;
  if (!std::filesystem::exists(path)) throw IoError("no record archive at " + path);
  const auto archive = harness::read_archive(path);
  if (archive.torn_tail) std::fprintf(stderr, "warning: ignoring a torn final line in %s\n", path.c_str());
  const auto report = harness::build_plan_report(plan, dataset, archive.records, strict);
  harness::EmitContext ctx{&plan, &dataset, "", ""};
  for (const auto& f : harness::emit_outputs(ctx, report, archive.records, plan.out)) {
    std::printf("wrote %s/%s\n", plan.out.c_str(), f.c_str());
  }
  return 0;
}

int cmd_probe(const std::string& model_path, const std::string& out, const std::string& records,
              const std::string& dataset_path, const std::string& kind, const std::string& method,
              harness::ProbeBootstrapOptions boot, harness::ProbePipelineOptions popt,
              const KeyFlags& flags) {
  const tinylm::Model model = tinylm::load_model(model_path);
  std::vector<probes::ProbeSource> sources;
  if (!records.empty()) {
    if (dataset_path.empty()) throw ConfigError("--records needs --dataset");
    const auto ds = harness::load_dataset(dataset_path, harness::parse_dataset_kind(kind));
    sources = harness::sources_from_records(harness::read_archive(records).records, ds,
                                            metrics::parse_method(method));
  } else {
    decode::DecodeConfig cfg;
    const KeyValues kv = flags.collect();
    const auto& keys = decode::decode_config_keys();
    kv.require_known({keys.begin(), keys.end()});
    decode::apply_decode_keys(kv, cfg);
    mitigate::RuleBasedJudge judge;
    sources = harness::bootstrap_probe_sources(model, cfg, judge, harness::builtin_probe_prompts(),
                                               harness::builtin_reference_techniques(), boot);
  }
  const auto report = harness::run_probe_pipeline(model, sources, popt);
  probes::save_probe_report(report, out);
  std::printf("model %s\nexamples %zu\n", report.source_model_id.c_str(), sources.size());
  for (std::size_t l = 0; l < report.layer_scores.size(); ++l) {
    std::printf("layer %zu score %.4f\n", l + 1, report.layer_scores[l]);
  }
  std::printf("set_A %s\nset_B %s\nsaved %s\n", format_int_list(report.set_A).c_str(),
              format_int_list(report.set_B).c_str(), out.c_str());
  return 0;
}

int cmd_retrieve(const std::string& corpus, const std::vector<std::string>& queries, std::size_t k) {
  const auto index = mitigate::RetrievalIndex::build(mitigate::load_corpus(corpus));
  std::printf("documents %zu terms %zu\n", index.documents().size(), index.vocabulary().size());
  for (const auto& q : queries) {
    const auto res = mitigate::retrieve(index, q, k);
    std::printf("query: %s\n", q.c_str());
    if (res.no_vocabulary_match) std::printf("  no in-vocabulary terms\n");
    for (std::size_t i = 0; i < res.hits.size(); ++i) {
      std::printf("  %zu %s %.6f\n", i + 1, res.hits[i].doc_id.c_str(), res.hits[i].score);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crelab: creativity vs. hallucination-mitigation experiments on toy and remote models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", harness::kToolVersion);

  // train-toy
  auto* train = app.add_subcommand("train-toy", "Train a toy transformer on a synthetic corpus");
  std::string train_out;
  std::size_t train_steps = 2000;
  std::size_t train_lines = 4000;
  std::size_t log_every = 0;
  std::string corpus_file;
  tinylm::ModelConfig mc;
  tinylm::TrainOptions topt;
  train->add_option("--out", train_out, "Output weights file")->required();
  train->add_option("--steps", train_steps, "Adam steps")->capture_default_str();
  train->add_option("--lines", train_lines, "Synthetic corpus lines")->capture_default_str();
  train->add_option("--corpus_file", corpus_file, "Plain-text corpus, one sequence per line");
  train->add_option("--n_layers", mc.n_layers)->capture_default_str();
  train->add_option("--n_heads", mc.n_heads)->capture_default_str();
  train->add_option("--d_model", mc.d_model)->capture_default_str();
  train->add_option("--d_head", mc.d_head)->capture_default_str();
  train->add_option("--max_seq_len", mc.max_seq_len)->capture_default_str();
  train->add_option("--model_seed", mc.seed, "Initialization seed")->capture_default_str();
  train->add_option("--train_seed", topt.seed, "Window sampling and corpus seed")->capture_default_str();
  train->add_option("--batch_size", topt.batch_size)->capture_default_str();
  train->add_option("--seq_len", topt.seq_len)->capture_default_str();
  train->add_option("--learning_rate", topt.learning_rate)->capture_default_str();
  train->add_option("--grad_clip", topt.grad_clip)->capture_default_str();
  train->add_option("--log_every", log_every, "Print every n-th step loss to stderr");

  // probe
  auto* probe = app.add_subcommand("probe", "Train per-head probes and pick layer sets A and B");
  std::string probe_model, probe_out, probe_records, probe_dataset, probe_kind = "neocoder",
                                                                   probe_method = "baseline";
  harness::ProbeBootstrapOptions boot;
  harness::ProbePipelineOptions popt;
  KeyFlags probe_flags;
  probe->add_option("--model", probe_model, "Weights file")->required();
  probe->add_option("--out", probe_out, "Probe report path")->required();
  probe->add_option("--records", probe_records, "Use archived generations instead of sampling");
  probe->add_option("--dataset", probe_dataset, "Dataset the records came from");
  probe->add_option("--kind", probe_kind)->capture_default_str();
  probe->add_option("--method", probe_method, "Records method to use")->capture_default_str();
  probe->add_option("--samples", boot.samples, "Bootstrap generations")->capture_default_str();
  probe->add_option("--sample_tokens", boot.max_new_tokens, "Tokens per bootstrap generation")
      ->capture_default_str();
  probe->add_option("--seed", boot.seed, "Bootstrap sampling seed")->capture_default_str();
  probe->add_option("--split_seed", popt.split_seed)->capture_default_str();
  probe->add_option("--fraction", popt.conditioning_fraction, "Conditioning fraction of each output")
      ->capture_default_str();
  probe->add_option("--threads", popt.threads)->capture_default_str();
  probe->add_option("--config", probe_flags.config_path, "Decode config file");
  probe_flags.add(*probe, decode_keys());

  // decode
  auto* dec = app.add_subcommand("decode", "Generate with baseline, DoLa or creative DoLa");
  std::string dec_model, dec_report;
  std::vector<std::string> dec_prompts;
  bool dec_trace = false;
  KeyFlags dec_flags;
  dec->add_option("--model", dec_model, "Weights file")->required();
  dec->add_option("--prompt", dec_prompts, "Prompt text (repeatable)")->required();
  dec->add_option("--probe_report", dec_report, "Take set_A/set_B from a probe report");
  dec->add_flag("--trace", dec_trace, "Print the premature layer of every step to stderr");
  dec->add_option("--config", dec_flags.config_path, "Decode config file");
  dec_flags.add(*dec, decode_keys());

  // run
  auto* run = app.add_subcommand("run", "Run an experiment plan (resumable)");
  KeyFlags run_flags;
  run->add_option("--config", run_flags.config_path, "Plan config file");
  run_flags.add(*run, harness::plan_keys());
  run_flags.add(*run, decode_keys());

  // report
  auto* rep = app.add_subcommand("report", "Rebuild metrics and plot files from an archive");
  KeyFlags rep_flags;
  std::string rep_records;
  bool rep_strict = false;
  rep->add_option("--records", rep_records, "Archive or records.jsonl (default <out>/archive.jsonl)");
  rep->add_flag("--strict", rep_strict, "Fail when a compared cell has no baseline");
  rep->add_option("--config", rep_flags.config_path, "Plan config file");
  rep_flags.add(*rep, harness::plan_keys());
  rep_flags.add(*rep, decode_keys());

  // retrieve-index
  auto* ret = app.add_subcommand("retrieve-index", "Index a corpus and run retrieval queries");
  std::string ret_corpus;
  std::vector<std::string> ret_queries;
  std::size_t ret_k = 3;
  ret->add_option("--corpus", ret_corpus, "JSON-lines file or directory of .txt files")->required();
  ret->add_option("--query", ret_queries, "Query text (repeatable)");
  ret->add_option("--k", ret_k)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      return cmd_train_toy(train_out, train_steps, train_lines, corpus_file, mc, topt, log_every);
    }
    if (*probe) {
      return cmd_probe(probe_model, probe_out, probe_records, probe_dataset, probe_kind,
                       probe_method, boot, popt, probe_flags);
    }
    if (*dec) return cmd_decode(dec_model, dec_prompts, dec_report, dec_flags, dec_trace);
    if (*run) return cmd_run(run_flags);
    if (*rep) return cmd_report(rep_flags, rep_records, rep_strict);
    if (*ret) return cmd_retrieve(ret_corpus, ret_queries, ret_k);
  } catch (const Error& e) {
    std::fprintf(stderr, "crelab: %s error: %s\n", to_string(e.kind()), e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "crelab: error: %s\n", e.what());
    return 3;
  }
  return 1;
}
