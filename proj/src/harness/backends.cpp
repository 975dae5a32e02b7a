#include "crelab/harness/backends.hpp"

#include "crelab/common/error.hpp"
#include "crelab/mitigate/endpoint.hpp"
#include "crelab/probes/report.hpp"
#include "crelab/tinylm/weights_io.hpp"

namespace crelab::harness {

OwnedBackends make_backends(const ExperimentPlan& plan) {
  OwnedBackends o;
  o.view.templates =
      plan.templates.empty() ? mitigate::default_templates() : mitigate::load_templates(plan.templates);
  mitigate::Lexicon lexicon =
      plan.lexicon.empty() ? mitigate::Lexicon::builtin() : mitigate::Lexicon::load(plan.lexicon);

  decode::DecodeConfig dc = plan.decode;
  if (plan.generator == "local") {
    o.model = std::make_shared<const tinylm::Model>(tinylm::load_model(plan.model));
    o.model_id = o.model->id();
  }
  if (!plan.probe_report.empty()) {
    const auto report = probes::load_probe_report(plan.probe_report);
    if (o.model) {
      probes::apply_probe_report(report, o.model_id, dc);
    } else {
      dc.set_A = report.set_A;
      dc.set_B = report.set_B;
    }
    o.probe_model_id = report.source_model_id;
  }

  if (plan.generator == "mock") {
    o.generator = std::make_unique<mitigate::RuleMockGenerator>();
  } else if (plan.generator == "echo") {
    o.generator = std::make_unique<mitigate::EchoGenerator>();
  } else if (plan.generator == "endpoint") {
    o.generator = std::make_unique<mitigate::ChatEndpointGenerator>(mitigate::EndpointConfig::from_env());
  } else if (plan.generator == "local") {
    if (plan.has_method(metrics::Method::creative_dola) && (dc.set_A.empty() || dc.set_B.empty())) {
      throw ConfigError("creative_dola needs layer sets: pass --probe_report or --set_A/--set_B");
    }
    if (plan.has_method(metrics::Method::creative_dola)) {
      decode::DecodeConfig check = dc;
      check.strategy = decode::Strategy::creative_dola;
      check.validate(o.model->config().n_layers);
    }
    o.generator = std::make_unique<mitigate::LocalModelGenerator>(o.model, dc);
  } else {
    throw ConfigError("unknown generator '" + plan.generator + "'");
  }

  if (plan.judge == "rule") {
    o.judge = std::make_unique<mitigate::RuleBasedJudge>(std::move(lexicon));
  } else {
    o.judge = std::make_unique<mitigate::GeneratorJudge>(*o.generator, o.view.templates);
  }
  o.checker = make_checker(plan.checker);
  if (plan.has_method(metrics::Method::rag)) {
    o.index = std::make_unique<mitigate::RetrievalIndex>(
        mitigate::RetrievalIndex::build(mitigate::load_corpus(plan.corpus)));
  }
  o.view.generator = o.generator.get();
  o.view.judge = o.judge.get();
  o.view.checker = o.checker.get();
  o.view.index = o.index.get();
  return o;
}

}  // namespace crelab::harness
