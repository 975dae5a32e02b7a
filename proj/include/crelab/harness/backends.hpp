#pragma once

#include "crelab/harness/checker.hpp"
#include "crelab/harness/plan.hpp"
#include "crelab/harness/runner.hpp"
#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/judge.hpp"
#include "crelab/mitigate/retrieval.hpp"
#include "crelab/tinylm/model.hpp"

#include <memory>
#include <string>

namespace crelab::harness {

/// Backends built from a plan, with ownership.
struct OwnedBackends {
  std::shared_ptr<const tinylm::Model> model;
  std::unique_ptr<mitigate::Generator> generator;
  std::unique_ptr<mitigate::Judge> judge;
  std::unique_ptr<CorrectnessChecker> checker;
  std::unique_ptr<mitigate::RetrievalIndex> index;
  std::string model_id;
  std::string probe_model_id;
  Backends view;
};

/// Loads templates, lexicon, model, probe report and corpus as the plan
/// asks. A probe report built for another model raises ConfigError.
OwnedBackends make_backends(const ExperimentPlan& plan);

}  // namespace crelab::harness
