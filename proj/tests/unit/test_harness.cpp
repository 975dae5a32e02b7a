#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/keyvalue.hpp"
#include "crelab/harness/backends.hpp"
#include "crelab/harness/checker.hpp"
#include "crelab/harness/dataset.hpp"
#include "crelab/harness/emit.hpp"
#include "crelab/harness/plan.hpp"
#include "crelab/harness/records.hpp"
#include "crelab/harness/runner.hpp"

#include "../support/test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace crelab;
using namespace crelab::harness;
using metrics::Method;

namespace {

const std::string kNeo = std::string(CRELAB_DATA_DIR) + "/fixtures/neocoder_toy.jsonl";
const std::string kCs4 = std::string(CRELAB_DATA_DIR) + "/fixtures/cs4_toy.jsonl";
const std::string kCorpus = std::string(CRELAB_DATA_DIR) + "/corpus/notes.jsonl";

const char* kNeoLine =
    R"({"id":"p1","statement":"Sum the list.","constraints":[["for-loop"],["for-loop","Sorting"]],"human_techniques":["math"],"tests":[{"input":"1 2","expected":"3"}]})";

ExperimentPlan mock_plan(const std::string& dataset, DatasetKind kind, const std::string& out) {
  ExperimentPlan p;
  p.dataset = dataset;
  p.kind = kind;
  p.methods = {Method::baseline, Method::cove, Method::rag};
  p.corpus = kCorpus;
  p.runs = 2;
  p.seed = 17;
  p.out = out;
  return p;
}

}  // namespace

// ---- datasets ---------------------------------------------------------------

TEST_CASE("neocoder dataset parsing") {
  const auto ds = parse_dataset(std::string(kNeoLine) + "\n\n", DatasetKind::neocoder);
  REQUIRE(ds.problems.size() == 1);
  const auto& p = ds.problems[0];
  CHECK(p.max_state() == 2);
  CHECK(p.constraints_at(0).empty());
  CHECK(p.constraints_at(2) == std::vector<std::string>{"for-loop", "sorting"});
  CHECK_THROWS_AS(p.constraints_at(3), IndexError);
  CHECK(p.human_techniques == std::set<std::string>{"math"});
  CHECK(ds.content_hash != 0);
  const auto prompt = build_prompt(p, DatasetKind::neocoder, 2);
  CHECK(prompt == "Sum the list.\nInput: 1 2\nDo not use these techniques: \"for-loop\", \"sorting\".\n"
                  "Explain the solution, then give only the final answer on the last line.\n");
  CHECK(build_prompt(p, DatasetKind::neocoder, 0).find("Do not use") == std::string::npos);
}

TEST_CASE("dataset errors name the line") {
  auto line_of = [](const std::string& text, DatasetKind kind) -> std::size_t {
    try {
      parse_dataset(text, kind);
    } catch (const LoadError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string ok(kNeoLine);
  CHECK(line_of(ok + "\n{bad json", DatasetKind::neocoder) == 2);
  CHECK(line_of(ok + "\n" + ok, DatasetKind::neocoder) == 2);
  CHECK(line_of(R"({"id":"x","statement":"s","constraints":[["a"],["b"]],"human_techniques":[],"tests":[]})",
                DatasetKind::neocoder) == 1);
  CHECK(line_of(R"({"id":"x","statement":"s","human_techniques":[],"tests":[]})", DatasetKind::neocoder) == 1);
  CHECK(line_of(R"({"id":"x","instruction":"i","constraints":[],"base_story":"b"})", DatasetKind::cs4) == 1);
  CHECK(line_of(ok + "\n" + R"({"id":"x","instruction":"i","constraints":["c"]})", DatasetKind::cs4) == 1);
}

TEST_CASE("cs4 dataset and prompt") {
  const auto ds = load_dataset(kCs4, DatasetKind::cs4);
  REQUIRE(ds.problems.size() == 3);
  const auto& p = ds.problems[0];
  CHECK(p.max_state() == 39);
  CHECK(p.constraints_at(7).size() == 7);
  const auto prompt = build_prompt(p, DatasetKind::cs4, 2);
  CHECK(prompt.find("Instruction: " + p.statement) != std::string::npos);
  CHECK(prompt.find("1. " + p.constraint_pool[0] + "\n2. " + p.constraint_pool[1] + "\n") != std::string::npos);
  CHECK(prompt.find(p.base_story) != std::string::npos);
  CHECK(parse_dataset_kind("cs4-like") == DatasetKind::cs4);
  CHECK_THROWS_AS(parse_dataset_kind("csv"), ConfigError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.jsonl", DatasetKind::cs4), IoError);
}

// ---- checkers ---------------------------------------------------------------

TEST_CASE("exact match checker") {
  const auto ds = parse_dataset(kNeoLine, DatasetKind::neocoder);
  ExactMatchChecker c;
  CHECK(final_line("a\nb\n  3  \n\n") == "3");
  CHECK(c.check(ds.problems[0], "reasoning\n3\n") == metrics::Verdict::correct);
  CHECK(c.check(ds.problems[0], "3\nreasoning") == metrics::Verdict::incorrect);
  ProblemSpec no_tests;
  CHECK(c.check(no_tests, "3") == metrics::Verdict::unknown);
}

TEST_CASE("command checker maps exit codes") {
  ProblemSpec p;
  p.id = "it's";
  CHECK(make_checker("command:grep -q yes {output_file}")->check(p, "yes") == metrics::Verdict::correct);
  CHECK(make_checker("command:grep -q yes {output_file}")->check(p, "no") == metrics::Verdict::incorrect);
  CHECK(make_checker("command:exit 7")->check(p, "x") == metrics::Verdict::unknown);
  CHECK(make_checker("command:test {problem_id} = \"it's\"")->check(p, "x") == metrics::Verdict::correct);
  CHECK_THROWS_AS(make_checker("fuzzy"), ConfigError);
}

// ---- plans ------------------------------------------------------------------

TEST_CASE("plan parsing and hashing") {
  const auto p = parse_plan("dataset = d.jsonl\nkind = cs4\nmethods = baseline, creative-dola\nruns = 2\n"
                            "seed = 4\nbeta = 0.2\nout = x\nworkers = 3\n");
  CHECK(p.kind == DatasetKind::cs4);
  CHECK(p.methods == std::vector<Method>{Method::baseline, Method::creative_dola});
  CHECK(p.resolved_states() == std::vector<int>{7, 15, 23, 31, 39});
  CHECK(p.decode.beta == 0.2f);
  CHECK(p.workers == 3);
  auto q = p;
  q.out = "elsewhere";
  q.workers = 1;
  q.max_cells = 5;
  CHECK(config_hash(q) == config_hash(p));
  q.seed = 5;
  CHECK(config_hash(q) != config_hash(p));
  CHECK(parse_plan(to_text(p)).methods == p.methods);
  CHECK_THROWS_AS(parse_plan("dataset = d\nunknown_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_plan("dataset = d\nmethods = baseline, telepathy\n"), ConfigError);
  ExperimentPlan bad;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.dataset = "d";
  bad.methods = {Method::rag};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.methods = {Method::baseline, Method::baseline};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.methods = {Method::baseline};
  bad.generator = "local";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("cell seeds differ per coordinate") {
  const auto s = cell_seed(1, "p", 2, Method::cove, 1);
  CHECK(s == cell_seed(1, "p", 2, Method::cove, 1));
  CHECK(s != cell_seed(2, "p", 2, Method::cove, 1));
  CHECK(s != cell_seed(1, "q", 2, Method::cove, 1));
  CHECK(s != cell_seed(1, "p", 3, Method::cove, 1));
  CHECK(s != cell_seed(1, "p", 2, Method::rag, 1));
  CHECK(s != cell_seed(1, "p", 2, Method::cove, 2));
}

TEST_CASE("reference state") {
  CHECK(reference_state({7, 15, 23, 31, 39}) == 23);
  CHECK(reference_state({20, 26}) == 20);
  CHECK(reference_state({7, 39}) == 7);
  CHECK(reference_state({30}) == 30);
}

// ---- records ----------------------------------------------------------------

TEST_CASE("record json round trip") {
  metrics::GenerationRecord r;
  r.problem_id = "p";
  r.state_t = 3;
  r.method = Method::creative_dola;
  r.run_index = 2;
  r.seed = 18446744073709551615ULL;
  r.output_text = "line\n\"quoted\"";
  r.techniques = {"a", "b"};
  r.constraints_violated = {"b"};
  r.verdict = metrics::Verdict::incorrect;
  r.judge.coherence = 4;
  r.judge.satisfied = 2;
  r.judge.total = 3;
  const auto line = record_to_json(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind(R"({"problem_id":"p","state":3,"method":"creative_dola","run":2,)", 0) == 0);
  CHECK(record_from_json(line) == r);

  r.output_text = std::string("bad \xff\xfe utf8");
  r.judge = {};
  r.error = "backend: down";
  const auto hex = record_to_json(r);
  CHECK(hex.find("output_hex") != std::string::npos);
  CHECK(record_from_json(hex) == r);

  CHECK_THROWS_AS(record_from_json("{}"), LoadError);
  auto j = nlohmann::json::parse(line);
  j["constraints_violated"] = {"zzz"};
  CHECK_THROWS_AS(record_from_json(j.dump()), LoadError);
}

TEST_CASE("archive torn tail") {
  metrics::GenerationRecord r;
  r.problem_id = "p";
  const std::string l = record_to_json(r) + "\n";
  auto a = parse_archive(l + l);
  CHECK(a.records.size() == 2);
  CHECK_FALSE(a.torn_tail);
  a = parse_archive(l + l.substr(0, 10));
  CHECK(a.records.size() == 1);
  CHECK(a.torn_tail);
  CHECK(a.valid_bytes == l.size());
  a = parse_archive(l + l.substr(0, l.size() - 1));
  CHECK(a.records.size() == 1);
  CHECK(a.torn_tail);
  CHECK_THROWS_AS(parse_archive("garbage\n" + l), LoadError);
  CHECK(read_archive("/nonexistent/archive.jsonl").records.empty());
}

// ---- runner -----------------------------------------------------------------

TEST_CASE("mock run: cell order, seeds, report") {
  testutil::TempDir dir("run");
  const auto plan = mock_plan(kNeo, DatasetKind::neocoder, dir.str());
  const auto ds = load_dataset(kNeo, DatasetKind::neocoder);
  auto ob = make_backends(plan);
  const auto res = run_experiment(plan, ds, ob.view);
  CHECK(res.summary.complete);
  CHECK(res.summary.total == ds.problems.size() * 6 * 3 * 2);
  CHECK(res.summary.failed == 0);
  REQUIRE(res.report);
  const auto cells = plan_cells(plan, ds);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& r = res.records[i];
    CHECK(r.problem_id == ds.problems[cells[i].problem].id);
    CHECK(r.state_t == cells[i].state);
    CHECK(r.method == cells[i].method);
    CHECK(r.run_index == cells[i].run);
    CHECK(r.seed == cell_seed(17, r.problem_id, r.state_t, r.method, r.run_index));
    for (const auto& v : r.constraints_violated) CHECK(r.techniques.count(v) == 1);
  }
  CHECK(cells[0].method == Method::baseline);
  CHECK(cells[1].method == Method::baseline);
  CHECK(cells[1].run == 2);
  CHECK(cells[2].method == Method::cove);
  const auto archive = read_archive(dir.file(kArchiveName));
  CHECK(archive.records == res.records);
}

TEST_CASE("workers do not change the archive") {
  testutil::TempDir a("w1"), b("w4");
  const auto ds = load_dataset(kCs4, DatasetKind::cs4);
  auto p1 = mock_plan(kCs4, DatasetKind::cs4, a.str());
  auto p4 = mock_plan(kCs4, DatasetKind::cs4, b.str());
  p4.workers = 4;
  auto o1 = make_backends(p1);
  auto o4 = make_backends(p4);
  const auto r1 = run_experiment(p1, ds, o1.view);
  const auto r4 = run_experiment(p4, ds, o4.view);
  CHECK(testutil::slurp(a.file(kArchiveName)) == testutil::slurp(b.file(kArchiveName)));
  CHECK(*r1.report == *r4.report);
}

TEST_CASE("resume after max_cells and after a torn write") {
  testutil::TempDir full("full"), part("part");
  const auto ds = load_dataset(kCs4, DatasetKind::cs4);
  auto plan = mock_plan(kCs4, DatasetKind::cs4, full.str());
  auto ob = make_backends(plan);
  run_experiment(plan, ds, ob.view);
  const auto want = testutil::slurp(full.file(kArchiveName));

  auto pp = mock_plan(kCs4, DatasetKind::cs4, part.str());
  pp.max_cells = 7;
  pp.workers = 2;
  auto pb = make_backends(pp);
  const auto first = run_experiment(pp, ds, pb.view);
  CHECK_FALSE(first.summary.complete);
  CHECK_FALSE(first.report);
  auto text = testutil::slurp(part.file(kArchiveName));
  CHECK(want.rfind(text, 0) == 0);
  testutil::spit(part.file(kArchiveName), text + want.substr(text.size(), 25));
  pp.max_cells = 0;
  const auto second = run_experiment(pp, ds, pb.view);
  CHECK(second.summary.complete);
  CHECK(second.summary.resumed == first.records.size());
  CHECK(testutil::slurp(part.file(kArchiveName)) == want);
  const auto third = run_experiment(pp, ds, pb.view);
  CHECK(third.summary.executed == 0);
  CHECK(testutil::slurp(part.file(kArchiveName)) == want);
}

TEST_CASE("an archive from another plan is rejected") {
  testutil::TempDir dir("other");
  const auto ds = load_dataset(kNeo, DatasetKind::neocoder);
  auto plan = mock_plan(kNeo, DatasetKind::neocoder, dir.str());
  plan.max_cells = 3;
  auto ob = make_backends(plan);
  run_experiment(plan, ds, ob.view);
  plan.seed = 99;
  CHECK_THROWS_AS(run_experiment(plan, ds, ob.view), ConfigError);
}

TEST_CASE("failed cells are recorded and not retried") {
  testutil::TempDir dir("fail");
  const auto ds = parse_dataset(kNeoLine, DatasetKind::neocoder);
  ExperimentPlan plan;
  plan.dataset = "inline";
  plan.methods = {Method::baseline};
  plan.states = {0, 1};
  plan.runs = 1;
  plan.out = dir.str();
  mitigate::ScriptedGenerator gen({"answer\n3", "answer\n4"});
  gen.fail_at(2);
  mitigate::RuleBasedJudge judge;
  ExactMatchChecker checker;
  Backends b;
  b.generator = &gen;
  b.judge = &judge;
  b.checker = &checker;
  const auto res = run_experiment(plan, ds, b);
  REQUIRE(res.records.size() == 2);
  CHECK(res.records[0].ok());
  CHECK(res.records[0].verdict == metrics::Verdict::correct);
  CHECK_FALSE(res.records[1].ok());
  CHECK(res.records[1].error.rfind("backend", 0) == 0);
  CHECK(res.summary.failed == 1);
  CHECK(res.report->diagnostics.failed_records == 1);
  const auto again = run_experiment(plan, ds, b);
  CHECK(again.summary.executed == 0);
  CHECK(gen.calls() == 2);
}

TEST_CASE("cs4 coherence reference comes from the baseline at the reference state") {
  testutil::TempDir dir("ref");
  const auto ds = load_dataset(kCs4, DatasetKind::cs4);
  ExperimentPlan plan;
  plan.dataset = kCs4;
  plan.kind = DatasetKind::cs4;
  plan.methods = {Method::baseline, Method::cove};
  plan.states = {7, 23};
  plan.runs = 1;
  plan.out = dir.str();
  auto ob = make_backends(plan);
  const auto res = run_experiment(plan, ds, ob.view);
  for (const auto& r : res.records) {
    if (r.method == Method::baseline && r.state_t == 23) CHECK(*r.judge.coherence == 5);
    CHECK(r.judge.total == r.state_t);
  }
}

TEST_CASE("emitted files are complete and path-free") {
  testutil::TempDir dir("emit");
  const auto ds = load_dataset(kNeo, DatasetKind::neocoder);
  auto plan = mock_plan(kNeo, DatasetKind::neocoder, dir.str());
  auto ob = make_backends(plan);
  const auto res = run_experiment(plan, ds, ob.view);
  EmitContext ctx{&plan, &ds, "", ""};
  const auto files = emit_outputs(ctx, *res.report, res.records, dir.str());
  CHECK(files == std::vector<std::string>{"metrics.csv", "pct_convergent.dat", "pct_divergent.dat",
                                          "records.jsonl", "manifest.json"});
  const auto manifest = nlohmann::json::parse(testutil::slurp(dir.file("manifest.json")));
  CHECK(manifest["config_hash"] == crelab::to_hex(config_hash(plan)));
  CHECK(manifest["records"] == res.records.size());
  CHECK(testutil::slurp(dir.file("manifest.json")).find(dir.str()) == std::string::npos);
  CHECK(testutil::slurp(dir.file("records.jsonl")) == testutil::slurp(dir.file(kArchiveName)));
  CHECK(plot_file_name(metrics::MetricId::quc) == "pct_quc.dat");
}

TEST_CASE("backends reject inconsistent plans") {
  ExperimentPlan p;
  p.dataset = kNeo;
  p.generator = "local";
  p.model = "/nonexistent/model.tlm";
  CHECK_THROWS_AS(make_backends(p), IoError);
  ExperimentPlan r;
  r.dataset = kNeo;
  r.methods = {Method::rag};
  r.corpus = "/nonexistent/corpus.jsonl";
  CHECK_THROWS_AS(make_backends(r), IoError);
}
