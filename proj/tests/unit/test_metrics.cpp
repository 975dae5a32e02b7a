#include "crelab/common/error.hpp"
#include "crelab/common/rng.hpp"
#include "crelab/metrics/metrics.hpp"
#include "crelab/metrics/report.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace crelab;
using namespace crelab::metrics;

namespace {

GenerationRecord rec(std::string pid, int state, Method m, int run, Verdict v,
                     std::set<std::string> tech = {}, std::set<std::string> viol = {}) {
  GenerationRecord r;
  r.problem_id = std::move(pid);
  r.state_t = state;
  r.method = m;
  r.run_index = run;
  r.verdict = v;
  r.techniques = std::move(tech);
  r.constraints_violated = std::move(viol);
  r.output_text = "some words to make the text long enough";
  return r;
}

}  // namespace

TEST_CASE("convergent: correct and unconstrained over known verdicts") {
  std::vector<GenerationRecord> rs{
      rec("a", 1, Method::baseline, 1, Verdict::correct),
      rec("b", 1, Method::baseline, 1, Verdict::correct, {"stack"}, {"stack"}),
      rec("c", 1, Method::baseline, 1, Verdict::incorrect),
      rec("d", 1, Method::baseline, 1, Verdict::unknown),
  };
  const auto v = neocoder_convergent(rs);
  CHECK(v.value == doctest::Approx(1.0 / 3.0));
  CHECK(v.n_samples == 3);
  CHECK(v.n_excluded == 1);
  rs.push_back(rec("e", 2, Method::baseline, 1, Verdict::correct));
  CHECK_THROWS_AS(neocoder_convergent(rs), InputError);
  std::vector<GenerationRecord> unknown{rec("a", 1, Method::baseline, 1, Verdict::unknown)};
  CHECK_THROWS_AS(neocoder_convergent(unknown), UndefinedMetricError);
}

TEST_CASE("divergent ratio and mean") {
  CHECK(divergent_ratio({"a", "b", "c", "d"}, {"a"}) == 0.75);
  CHECK(divergent_ratio({"a"}, {"a", "b"}) == 0.0);
  CHECK_THROWS_AS(divergent_ratio({}, {"a"}), UndefinedMetricError);
  std::vector<GenerationRecord> rs{
      rec("p", 0, Method::cove, 1, Verdict::correct, {"x", "y"}),
      rec("p", 0, Method::cove, 1, Verdict::correct, {}),
      rec("q", 0, Method::cove, 1, Verdict::correct, {"z"}),
  };
  const HumanTechniques human{{"p", {"x"}}, {"q", {"z"}}};
  const auto v = neocoder_divergent(rs, human);
  CHECK(v.value == 0.25);
  CHECK(v.n_samples == 2);
  CHECK(v.n_excluded == 1);
  const auto missing_human = neocoder_divergent(rs, HumanTechniques{});
  CHECK(missing_human.value == 1.0);
}

TEST_CASE("cs4 scalar metrics") {
  CHECK(constraint_satisfaction(3, 4) == 0.75);
  CHECK_THROWS_AS(constraint_satisfaction(1, 0), UndefinedMetricError);
  CHECK_THROWS_AS(constraint_satisfaction(5, 4), InputError);
  CHECK(coherence_norm(4.0) == 0.8);
  CHECK_THROWS_AS(coherence_norm(0.5), InputError);
  CHECK_THROWS_AS(coherence_norm(5.5), InputError);
  CHECK(quc(0.8, 0.5) == 0.4);
  CHECK_THROWS_AS(quc(1.2, 0.5), InputError);
  CHECK(pct_diff(0.55, 0.5) == doctest::Approx(10.0));
  CHECK(pct_diff(0.4, 0.5) == doctest::Approx(-20.0));
  CHECK_THROWS_AS(pct_diff(1.0, 0.0), UndefinedMetricError);
}

TEST_CASE("dist-n worked examples") {
  CHECK(ngram_tokens("Hello, World!  it's  --  ok") ==
        std::vector<std::string>{"hello", "world", "its", "ok"});
  CHECK(dist_n("a b c d e") == 1.0);
  // bigrams: 4 of 5 unique; trigrams 4/4; 4-grams 3/3
  CHECK(dist_n("a b a b c d") == doctest::Approx(4.0 / 5.0));
  CHECK(dist_n("x x x x") == doctest::Approx(1.0 / 3.0 * 1.0 / 2.0 * 1.0));
  CHECK_THROWS_AS(dist_n("too short text"), UndefinedMetricError);
  CHECK_THROWS_AS(dist_n("a b c d", 3, 2), ConfigError);
}

TEST_CASE("dist-n agrees with pairwise enumeration") {
  Rng rng(12);
  const char* words[] = {"the", "The", "cat", "cat.", "sat", "on", "mat", "a", "!", "dog"};
  for (int i = 0; i < 100; ++i) {
    std::string text;
    const std::size_t n = 4 + uniform_index(rng, 30);
    for (std::size_t k = 0; k < n; ++k) text += std::string(words[uniform_index(rng, 10)]) + (k % 3 ? " " : "\n ");
    if (oracle::words(text).size() < 4) continue;
    CHECK(dist_n(text) == oracle::dist_n(text, 2, 4));
  }
}

TEST_CASE("report: per-run means, pct reasons, diagnostics") {
  std::vector<GenerationRecord> rs;
  for (int run = 1; run <= 2; ++run) {
    rs.push_back(rec("a", 1, Method::baseline, run, Verdict::correct, {"x"}));
    rs.push_back(rec("b", 1, Method::baseline, run, run == 1 ? Verdict::correct : Verdict::incorrect, {"y"}));
    rs.push_back(rec("a", 1, Method::cove, run, Verdict::correct, {"x", "q"}));
    rs.push_back(rec("b", 1, Method::cove, run, Verdict::unknown, {}));
    rs.push_back(rec("a", 2, Method::cove, run, Verdict::correct, {"q"}));
  }
  auto failed = rec("b", 2, Method::baseline, 1, Verdict::unknown);
  failed.error = "backend: boom";
  rs.push_back(failed);
  const HumanTechniques human{{"a", {"x"}}, {"b", {"y"}}};
  ReportOptions opt;
  opt.human_techniques = &human;
  CHECK_THROWS_AS(build_report(rs, opt), ReportError);
  opt.require_baseline = false;
  const auto rep = build_report(rs, opt);
  CHECK(rep.methods == std::vector<Method>{Method::baseline, Method::cove});
  CHECK(rep.states == std::vector<int>{1, 2});
  const auto& b1 = rep.cell(Method::baseline, 1, MetricId::neocoder_convergent);
  CHECK(*b1.value == 0.75);
  CHECK(b1.n_runs == 2);
  CHECK(*b1.pct.value == 0.0);
  const auto& c1 = rep.cell(Method::cove, 1, MetricId::neocoder_convergent);
  CHECK(*c1.value == 1.0);
  CHECK(*c1.pct.value == doctest::Approx(100.0 / 3.0));
  const auto& d1 = rep.cell(Method::cove, 1, MetricId::neocoder_divergent);
  CHECK(*d1.value == 0.5);
  CHECK(d1.n_samples == 2);
  CHECK(*rep.cell(Method::baseline, 1, MetricId::neocoder_divergent).value == 0.0);
  CHECK(rep.cell(Method::cove, 1, MetricId::neocoder_divergent).pct.undefined_reason == "zero-baseline");
  CHECK(rep.cell(Method::cove, 2, MetricId::neocoder_convergent).pct.undefined_reason == "missing-baseline");
  CHECK(rep.cell(Method::baseline, 2, MetricId::neocoder_convergent).pct.undefined_reason == "no-value");
  CHECK(rep.diagnostics.failed_records == 1);
  CHECK(rep.diagnostics.unknown_verdicts == 2);
  CHECK(rep.diagnostics.empty_technique_sets == 2);
  CHECK(rep.coverage.at({Method::baseline, 2}).failed == 1);
  CHECK_FALSE(rep.coverage.at({Method::baseline, 2}).complete());

  auto shuffled = rs;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(build_report(shuffled, opt) == rep);

  const auto csv = to_csv(rep);
  CHECK(csv.rfind("method,state,metric,value,pct_diff,n_samples\n", 0) == 0);
  CHECK(csv.find("baseline,1,convergent,0.75,0,4\n") != std::string::npos);
  CHECK(csv.find("cove,1,divergent,0.5,undefined:zero-baseline,2\n") != std::string::npos);
  CHECK(csv.find("baseline,2,convergent,NA,undefined:no-value,0\n") != std::string::npos);

  const auto plot = plot_data(rep, MetricId::neocoder_convergent);
  CHECK(plot.find("# state baseline cove\n") != std::string::npos);
  CHECK(plot.find("\n1 0 33.3333333333333") != std::string::npos);
  CHECK(plot.find("\n2 NaN NaN\n") != std::string::npos);
  CHECK_THROWS_AS(plot_data(rep, MetricId::quc), ReportError);
}

TEST_CASE("report: cs4 family") {
  std::vector<GenerationRecord> rs;
  auto mk = [&](Method m, int run, int coh, int sat, int tot, std::string text) {
    auto r = rec("s", 7, m, run, Verdict::unknown);
    r.judge.coherence = coh;
    r.judge.satisfied = sat;
    r.judge.total = tot;
    r.output_text = std::move(text);
    rs.push_back(r);
  };
  mk(Method::baseline, 1, 5, 7, 7, "a b c d e f");
  mk(Method::baseline, 2, 3, 0, 7, "a a a a");
  mk(Method::rag, 1, 4, 7, 7, "w x");
  ReportOptions opt;
  opt.family = MetricFamily::cs4;
  const auto rep = build_report(rs, opt);
  CHECK(*rep.cell(Method::baseline, 7, MetricId::constraint_satisfaction).value == 0.5);
  CHECK(*rep.cell(Method::baseline, 7, MetricId::coherence).value == doctest::Approx(0.8));
  CHECK(*rep.cell(Method::baseline, 7, MetricId::quc).value == doctest::Approx((1.0 + 0.0) / 2));
  CHECK(*rep.cell(Method::baseline, 7, MetricId::dist_n).value == doctest::Approx((1.0 + 1.0 / 6.0) / 2));
  CHECK_FALSE(rep.cell(Method::rag, 7, MetricId::dist_n).value);
  CHECK(rep.diagnostics.too_short_for_dist_n == 1);
  CHECK(*rep.cell(Method::rag, 7, MetricId::quc).pct.value == doctest::Approx(60.0));
}
