#include "crelab/harness/runner.hpp"

#include "crelab/common/error.hpp"
#include "crelab/harness/records.hpp"
#include "crelab/mitigate/cove.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace crelab::harness {

namespace {

using metrics::GenerationRecord;
using metrics::Method;

std::optional<decode::Strategy> strategy_for(Method m) {
  switch (m) {
    case Method::dola: return decode::Strategy::dola;
    case Method::creative_dola: return decode::Strategy::creative_dola;
    default: return decode::Strategy::baseline;
  }
}

std::string describe(const std::exception& e) {
  if (const auto* ce = dynamic_cast<const Error*>(&e)) {
    return std::string(to_string(ce->kind())) + ": " + ce->what();
  }
  return std::string("error: ") + e.what();
}

std::string generate_output(const ExperimentPlan& plan, const std::string& prompt, Method method,
                            std::uint64_t seed, Backends& b) {
  mitigate::GenerationRequest req;
  req.prompt = prompt;
  req.seed = seed;
  req.strategy = strategy_for(method);
  switch (method) {
    case Method::cove: {
      mitigate::CoVeOptions opt;
      opt.per_question = plan.cove_per_question;
      opt.seed = seed;
      opt.strategy = req.strategy;
      return mitigate::cove_run(prompt, *b.generator, b.templates, opt).final_text;
    }
    case Method::rag:
      if (b.index == nullptr) throw ConfigError("method rag needs a retrieval index");
      return mitigate::rag_generate(prompt, *b.index, *b.generator, b.templates, plan.rag_k, req).text;
    default:
      return b.generator->complete(req);
  }
}

bool same_cell(const GenerationRecord& r, const GenerationRecord& expected) {
  return r.problem_id == expected.problem_id && r.state_t == expected.state_t &&
         r.method == expected.method && r.run_index == expected.run_index &&
         r.seed == expected.seed;
}

GenerationRecord cell_stub(const ExperimentPlan& plan, const Dataset& ds, const CellKey& c) {
  GenerationRecord r;
  r.problem_id = ds.problems[c.problem].id;
  r.state_t = c.state;
  r.method = c.method;
  r.run_index = c.run;
  r.seed = cell_seed(plan.seed, r.problem_id, c.state, c.method, c.run);
  return r;
}

}  // namespace

std::vector<CellKey> plan_cells(const ExperimentPlan& plan, const Dataset& dataset) {
  const auto states = plan.resolved_states();
  std::vector<CellKey> cells;
  for (std::size_t p = 0; p < dataset.problems.size(); ++p) {
    for (int s : states) {
      if (s > dataset.problems[p].max_state()) {
        throw ConfigError("state " + std::to_string(s) + " exceeds the " +
                          std::to_string(dataset.problems[p].max_state()) +
                          " constraint states of problem " + dataset.problems[p].id);
      }
      for (Method m : plan.methods) {
        for (int run = 1; run <= plan.runs; ++run) cells.push_back({p, s, m, run});
      }
    }
  }
  return cells;
}

int reference_state(const std::vector<int>& states) {
  if (states.empty()) throw ConfigError("no states to pick a reference from");
  int best = states.front();
  for (int s : states) {
    const int d = std::abs(s - 23);
    const int bd = std::abs(best - 23);
    if (d < bd || (d == bd && s < best)) best = s;
  }
  return best;
}

namespace {

using ReferenceFn = std::function<std::string(const std::string& own_output)>;

GenerationRecord run_cell_with(const ExperimentPlan& plan, const Dataset& dataset,
                               const CellKey& cell, Backends& b, const ReferenceFn& reference,
                               std::ostream* log, std::mutex* log_mu) {
  GenerationRecord rec = cell_stub(plan, dataset, cell);
  const ProblemSpec& problem = dataset.problems[cell.problem];
  try {
    const std::string prompt = build_prompt(problem, dataset.kind, cell.state);
    rec.output_text = generate_output(plan, prompt, cell.method, rec.seed, b);
    const auto constraints = problem.constraints_at(cell.state);
    if (dataset.kind == DatasetKind::neocoder) {
      rec.techniques = b.judge->extract_techniques(rec.output_text);
      for (const auto& c : constraints) {
        if (rec.techniques.count(c)) rec.constraints_violated.insert(c);
      }
      rec.verdict = b.checker->check(problem, rec.output_text);
    } else {
      if (!constraints.empty()) {
        const auto cj = b.judge->judge_constraints(rec.output_text, constraints);
        rec.judge.satisfied = cj.satisfied;
        rec.judge.total = static_cast<int>(constraints.size());
      }
      const auto coh = b.judge->judge_coherence(rec.output_text, reference(rec.output_text));
      rec.judge.coherence = coh.score;
      if (coh.clamped && log) {
        std::unique_lock<std::mutex> lock;
        if (log_mu) lock = std::unique_lock(*log_mu);
        *log << "warning: " << rec.problem_id << ": " << coh.warning << '\n';
      }
    }
  } catch (const std::exception& e) {
    GenerationRecord failed = cell_stub(plan, dataset, cell);
    failed.error = describe(e);
    return failed;
  }
  return rec;
}

}  // namespace

GenerationRecord run_cell(const ExperimentPlan& plan, const Dataset& dataset, const CellKey& cell,
                          Backends& b, const std::string& reference_story, std::ostream* log) {
  return run_cell_with(
      plan, dataset, cell, b, [&](const std::string&) { return reference_story; }, log, nullptr);
}

metrics::MetricReport build_plan_report(const ExperimentPlan& plan, const Dataset& dataset,
                                        const std::vector<GenerationRecord>& records, bool strict) {
  const auto human = human_techniques(dataset);
  metrics::ReportOptions opt;
  opt.family = dataset.kind == DatasetKind::neocoder ? metrics::MetricFamily::neocoder
                                                     : metrics::MetricFamily::cs4;
  opt.baseline = Method::baseline;
  opt.methods = plan.methods;
  opt.states = plan.resolved_states();
  opt.require_baseline = strict;
  opt.human_techniques = &human;
  return metrics::build_report(records, opt);
}

ExperimentResult run_experiment(const ExperimentPlan& plan, const Dataset& dataset, Backends& b,
                                std::ostream* log) {
  namespace fs = std::filesystem;
  plan.validate();
  if (plan.out.empty()) throw ConfigError("plan needs an output directory");
  if (!b.generator || !b.judge || !b.checker) throw ConfigError("backends are incomplete");
  if (plan.has_method(Method::rag) && !b.index) throw ConfigError("method rag needs a retrieval index");

  std::error_code ec;
  fs::create_directories(plan.out, ec);
  if (!fs::is_directory(plan.out)) throw IoError("cannot create output directory '" + plan.out + "'");
  const std::string archive_path = (fs::path(plan.out) / kArchiveName).string();

  const auto cells = plan_cells(plan, dataset);
  std::vector<GenerationRecord> expected;
  expected.reserve(cells.size());
  for (const auto& c : cells) expected.push_back(cell_stub(plan, dataset, c));

  ArchiveContents existing = read_archive(archive_path);
  if (existing.records.size() > cells.size()) {
    throw ConfigError("archive '" + archive_path + "' has more cells than this plan");
  }
  for (std::size_t i = 0; i < existing.records.size(); ++i) {
    if (!same_cell(existing.records[i], expected[i])) {
      throw ConfigError("archive '" + archive_path + "' does not match this plan at record " +
                        std::to_string(i + 1) + "; use a fresh output directory");
    }
  }
  if (existing.torn_tail || fs::exists(archive_path)) {
    fs::resize_file(archive_path, existing.valid_bytes, ec);
    if (ec) throw IoError("cannot truncate archive '" + archive_path + "': " + ec.message());
  }

  ExperimentResult result;
  result.summary.total = cells.size();
  result.summary.resumed = existing.records.size();
  std::vector<std::optional<GenerationRecord>> slots(cells.size());
  for (std::size_t i = 0; i < existing.records.size(); ++i) slots[i] = std::move(existing.records[i]);

  // cs4 coherence references: the baseline story of the same problem and run
  // at the reference state, else the dataset's base story.
  const bool needs_reference = dataset.kind == DatasetKind::cs4;
  const int ref_state = needs_reference ? reference_state(plan.resolved_states()) : 0;
  const bool baseline_reference = needs_reference && plan.has_method(Method::baseline);
  auto is_reference = [&](const CellKey& c) {
    return baseline_reference && c.state == ref_state && c.method == Method::baseline;
  };
  std::map<std::pair<std::size_t, int>, std::size_t> reference_index;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (is_reference(cells[i])) reference_index[{cells[i].problem, cells[i].run}] = i;
  }
  std::vector<std::promise<std::string>> ref_promise(cells.size());
  std::vector<std::shared_future<std::string>> ref_future(cells.size());
  for (const auto& [key, idx] : reference_index) {
    ref_future[idx] = ref_promise[idx].get_future().share();
    if (slots[idx]) {
      const auto& r = *slots[idx];
      ref_promise[idx].set_value(r.ok() ? r.output_text : dataset.problems[cells[idx].problem].base_story);
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = existing.records.size(); i < cells.size(); ++i) {
    if (is_reference(cells[i])) order.push_back(i);
  }
  for (std::size_t i = existing.records.size(); i < cells.size(); ++i) {
    if (!is_reference(cells[i])) order.push_back(i);
  }
  if (plan.max_cells > 0 && order.size() > plan.max_cells) order.resize(plan.max_cells);

  std::ofstream archive(archive_path, std::ios::binary | std::ios::app);
  if (!archive) throw IoError("cannot open archive '" + archive_path + "' for appending");

  std::mutex write_mu;
  std::mutex log_mu;
  std::size_t next_to_write = existing.records.size();
  std::atomic<std::size_t> next_job{0};
  std::exception_ptr fatal;

  auto finish = [&](std::size_t idx, GenerationRecord rec) {
    std::lock_guard lock(write_mu);
    slots[idx] = std::move(rec);
    ++result.summary.executed;
    while (next_to_write < slots.size() && slots[next_to_write]) {
      archive << record_to_json(*slots[next_to_write]) << '\n';
      ++next_to_write;
    }
    archive.flush();
    if (!archive && !fatal) {
      fatal = std::make_exception_ptr(IoError("failed writing archive '" + archive_path + "'"));
    }
  };

  auto worker = [&] {
    for (std::size_t j = next_job++; j < order.size(); j = next_job++) {
      const std::size_t idx = order[j];
      const CellKey& c = cells[idx];
      std::string reference;
      if (needs_reference) {
        const auto it = reference_index.find({c.problem, c.run});
        if (it == reference_index.end() || it->second == idx) {
          reference = dataset.problems[c.problem].base_story;
        } else {
          reference = ref_future[it->second].get();
        }
      }
      GenerationRecord rec;
      if (is_reference(c)) {
        // Judged against its own text; dependents see the final outcome only.
        rec = run_cell_with(
            plan, dataset, c, b, [](const std::string& own) { return own; }, log, &log_mu);
        ref_promise[idx].set_value(rec.ok() ? rec.output_text
                                            : dataset.problems[c.problem].base_story);
      } else {
        rec = run_cell_with(
            plan, dataset, c, b, [&](const std::string&) { return reference; }, log, &log_mu);
      }
      finish(idx, std::move(rec));
    }
  };

  const unsigned n_workers =
      std::max(1u, std::min<unsigned>(plan.workers, static_cast<unsigned>(std::max<std::size_t>(order.size(), 1))));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // A truncated run may leave reference promises unfulfilled; nobody waits on
  // them because dependents are only dispatched after their reference.
  if (fatal) std::rethrow_exception(fatal);

  result.summary.complete = next_to_write == cells.size();
  for (std::size_t i = 0; i < next_to_write; ++i) {
    result.records.push_back(*slots[i]);
    result.summary.failed += !slots[i]->ok();
  }
  if (result.summary.complete) result.report = build_plan_report(plan, dataset, result.records);
  return result;
}

}  // namespace crelab::harness
