#include "crelab/common/error.hpp"
#include "crelab/mitigate/cove.hpp"
#include "crelab/mitigate/generator.hpp"
#include "crelab/mitigate/judge.hpp"
#include "crelab/mitigate/retrieval.hpp"
#include "crelab/mitigate/templates.hpp"

#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

#include <doctest.h>

#include <thread>

using namespace crelab;
using namespace crelab::mitigate;

// ---- generators -----------------------------------------------------------

TEST_CASE("scripted generator replays, fails on demand and records requests") {
  ScriptedGenerator g({"one", "two"});
  g.fail_at(2);
  GenerationRequest r;
  r.prompt = "p";
  CHECK(g.complete(r) == "one");
  CHECK_THROWS_AS(g.complete(r), BackendError);
  CHECK(g.complete(r) == "two");
  CHECK_THROWS_AS(g.complete(r), BackendError);
  CHECK(g.calls() == 4);
  CHECK(g.requests().size() == 4);
  ScriptedGenerator c({"x", "y"}, true);
  CHECK(c.complete(r) == "x");
  CHECK(c.complete(r) == "y");
  CHECK(c.complete(r) == "x");
}

TEST_CASE("rule mock is a pure function of the request") {
  RuleMockGenerator g;
  GenerationRequest r;
  r.prompt = "Write code.\nDo not use these techniques: \"recursion\".";
  r.seed = 5;
  const auto a = g.complete(r);
  CHECK(a == g.complete(r));
  r.seed = 6;
  CHECK(a != g.complete(r));

  r.purpose = Purpose::cove_questions;
  const auto qs = parse_list_items(g.complete(r));
  CHECK((qs.size() == 2 || qs.size() == 3));
  r.purpose = Purpose::cove_answers;
  r.expected_items = 4;
  CHECK(parse_list_items(g.complete(r)).size() == 4);
  r.purpose = Purpose::judge_constraints;
  r.expected_items = 3;
  CHECK(parse_constraint_reply(g.complete(r), 3).size() == 3);
  r.purpose = Purpose::judge_coherence;
  const auto coh = parse_coherence_reply(g.complete(r));
  CHECK((coh.score >= 1 && coh.score <= 5));
  CHECK_FALSE(coh.clamped);
  r.purpose = Purpose::judge_techniques;
  CHECK(parse_technique_reply(g.complete(r)).size() == 1);
}

TEST_CASE("rule mock is safe to share between threads") {
  RuleMockGenerator g;
  std::vector<std::string> out(8);
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&, i] {
      GenerationRequest r;
      r.prompt = "same";
      r.seed = 1;
      for (int k = 0; k < 50; ++k) out[static_cast<std::size_t>(i)] = g.complete(r);
    });
  }
  for (auto& t : ts) t.join();
  for (const auto& s : out) CHECK(s == out[0]);
}

// ---- templates ------------------------------------------------------------

TEST_CASE("shipped template files equal the built-in defaults") {
  const auto loaded = load_templates(std::string(CRELAB_DATA_DIR) + "/templates");
  const auto builtin = default_templates();
  const Template TemplateSet::*fields[] = {
      &TemplateSet::cove_draft,  &TemplateSet::cove_questions,   &TemplateSet::cove_answers,
      &TemplateSet::cove_answer_one, &TemplateSet::cove_final,   &TemplateSet::rag,
      &TemplateSet::judge_techniques, &TemplateSet::judge_constraints, &TemplateSet::judge_coherence};
  REQUIRE(template_names().size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CAPTURE(template_names()[i]);
    const auto file = testutil::slurp(std::string(CRELAB_DATA_DIR) + "/templates/" + template_names()[i] + ".txt");
    CHECK(file == (builtin.*fields[i]).text());
    CHECK((loaded.*fields[i]).text() == (builtin.*fields[i]).text());
  }
  CHECK_NOTHROW(builtin.validate());
}

TEST_CASE("template placeholders and rendering") {
  Template t("t", "Solve {problem} with {draft}. Braces {like this} and {} stay.");
  CHECK(t.placeholders() == std::set<std::string>{"problem", "draft"});
  CHECK(t.render({{"problem", "P"}, {"draft", "{problem}"}}) ==
        "Solve P with {problem}. Braces {like this} and {} stay.");
  CHECK_THROWS_AS(t.render({{"problem", "P"}}), ConfigError);
  CHECK_THROWS_AS(t.validate({"problem"}, {"problem"}), ConfigError);
  CHECK_THROWS_AS(t.validate({"problem", "draft", "qa"}, {"qa"}), ConfigError);
  CHECK_NOTHROW(t.validate({"problem", "draft"}, {"problem", "draft"}));
}

TEST_CASE("template directory overrides and validation") {
  testutil::TempDir dir("tpl");
  testutil::spit(dir.file("rag.txt"), "CTX {context}\nQ {problem}\n");
  const auto t = load_templates(dir.str());
  CHECK(t.rag.text() == "CTX {context}\nQ {problem}\n");
  CHECK(t.cove_draft.text() == default_templates().cove_draft.text());
  testutil::spit(dir.file("cove_final.txt"), "only {problem}\n");
  CHECK_THROWS_AS(load_templates(dir.str()), ConfigError);
  CHECK_THROWS_AS(load_templates(dir.file("nope")), IoError);
}

// ---- CoVe -----------------------------------------------------------------

TEST_CASE("list parsing") {
  const auto items = parse_list_items("Intro line\n1. first\n2) second\n- third\n* fourth\n+ fifth\n3.no space\n-\n  4.   padded  \n");
  CHECK(items == std::vector<std::string>{"first", "second", "third", "fourth", "fifth", "padded"});
  CHECK(parse_list_items("no list here").empty());
}

TEST_CASE("cove batched transcript") {
  ScriptedGenerator g({"DRAFT", "1. Is it fast?\n2. Is it right?", "1. yes\n2. no", "FINAL"});
  const auto tpl = default_templates();
  CoVeOptions opt;
  opt.seed = 3;
  const auto t = cove_run("PROBLEM", g, tpl, opt);
  CHECK(t.generator_calls == 4);
  CHECK(g.calls() == 4);
  REQUIRE(t.stage_prompts.size() == 4);
  CHECK(t.draft == "DRAFT");
  CHECK(t.verification_questions == std::vector<std::string>{"Is it fast?", "Is it right?"});
  CHECK(t.verification_answers == std::vector<std::string>{"yes", "no"});
  CHECK(t.final_text == "FINAL");
  CHECK(t.stage_prompts[3].find("DRAFT") != std::string::npos);
  CHECK(t.stage_prompts[3].find(format_qa(t.verification_questions, t.verification_answers)) != std::string::npos);
  CHECK(format_qa({"a"}, {"b"}) == "Q1: a\nA1: b\n");
  const auto reqs = g.requests();
  CHECK(reqs[0].purpose == Purpose::cove_draft);
  CHECK(reqs[2].expected_items == 2);
  CHECK(reqs[3].purpose == Purpose::cove_final);
  CHECK(reqs[0].seed != reqs[1].seed);
}

TEST_CASE("cove per-question mode") {
  ScriptedGenerator g({"D", "- q one\n- q two\n- q three", "a1", "a2", "a3", "F"});
  CoVeOptions opt;
  opt.per_question = true;
  const auto t = cove_run("P", g, default_templates(), opt);
  CHECK(t.generator_calls == 6);
  CHECK(t.verification_answers == std::vector<std::string>{"a1", "a2", "a3"});
  CHECK(t.stage_prompts.size() == 4);
  CHECK(t.stage_prompts[2].find("q two") != std::string::npos);
  CHECK(t.stage_prompts[3].find("Q3: q three\nA3: a3\n") != std::string::npos);
}

TEST_CASE("cove failures carry their stage") {
  auto stage_of = [](std::vector<std::string> replies, std::size_t fail) {
    ScriptedGenerator g(std::move(replies));
    if (fail) g.fail_at(fail);
    try {
      cove_run("P", g, default_templates());
    } catch (const PipelineError& e) {
      return e.stage();
    }
    return 0;
  };
  CHECK(stage_of({"D", "1. q", "A", "F"}, 1) == 1);
  CHECK(stage_of({"D", "no questions at all", "A", "F"}, 0) == 2);
  CHECK(stage_of({"D", "1. q\n2. r", "1. only one", "F"}, 0) == 3);
  CHECK(stage_of({"D", "1. q", "unnumbered answer", "F"}, 0) == 0);
  CHECK(stage_of({"D", "1. q", "A", "F"}, 4) == 4);
}

// ---- retrieval ------------------------------------------------------------

TEST_CASE("tf-idf index by hand") {
  const auto ix = RetrievalIndex::build({{"d1", "apple banana", ""}, {"d2", "banana banana cherry", ""}});
  CHECK(ix.vocabulary().at("apple") == 0);
  CHECK(ix.vocabulary().at("banana") == 1);
  CHECK(ix.vocabulary().at("cherry") == 2);
  const double idf1 = std::log(3.0 / 2.0) + 1.0;
  CHECK(ix.idf()[0] == doctest::Approx(idf1));
  CHECK(ix.idf()[1] == doctest::Approx(1.0));
  const auto r = retrieve(ix, "Cherry!", 5);
  REQUIRE(r.hits.size() == 2);
  CHECK(r.hits[0].doc_id == "d2");
  const double norm2 = std::sqrt(4.0 + idf1 * idf1);
  CHECK(r.hits[0].score == doctest::Approx(idf1 / norm2));
  CHECK(r.hits[1].score == 0.0);
  CHECK(retrieve(ix, "zebra").no_vocabulary_match);
  CHECK(retrieve(ix, "zebra").hits.empty());
  CHECK_THROWS_AS(retrieve(ix, "apple", 0), ConfigError);
  CHECK_THROWS_AS(RetrievalIndex::build({}), InputError);
  CHECK_THROWS_AS(RetrievalIndex::build({{"a", "x", ""}, {"a", "y", ""}}), InputError);
  CHECK_THROWS_AS(RetrievalIndex::build({{"a", "!!", ""}}), InputError);
}

TEST_CASE("retrieval ties break by id and match the dense oracle") {
  Rng rng(21);
  for (int c = 0; c < 20; ++c) {
    std::vector<Document> docs;
    std::vector<std::pair<std::string, std::string>> plain;
    const std::size_t n = 1 + uniform_index(rng, 60);
    for (std::size_t i = 0; i < n; ++i) {
      std::string text;
      const std::size_t len = 1 + uniform_index(rng, 6);
      for (std::size_t k = 0; k < len; ++k) text += "w" + std::to_string(uniform_index(rng, 12)) + " ";
      const std::string id = "doc" + std::to_string(uniform_index(rng, 1000000)) + "_" + std::to_string(i);
      docs.push_back({id, text, ""});
      plain.emplace_back(id, text);
    }
    const auto ix = RetrievalIndex::build(docs);
    const std::string q = "w" + std::to_string(uniform_index(rng, 12)) + " w3";
    const auto got = retrieve(ix, q, n);
    const auto want = oracle::dense_rank(plain, q);
    if (got.no_vocabulary_match) {
      for (const auto& w : want) CHECK(w.score == 0.0);
      continue;
    }
    REQUIRE(got.hits.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.hits[i].doc_id == want[i].id);
      CHECK(got.hits[i].score == want[i].score);
    }
  }
}

TEST_CASE("corpus loading") {
  testutil::TempDir dir("corpus");
  testutil::spit(dir.file("b.txt"), "beta text");
  testutil::spit(dir.file("a.txt"), "alpha text");
  testutil::spit(dir.file("skip.md"), "ignored");
  const auto docs = load_corpus(dir.str());
  REQUIRE(docs.size() == 2);
  CHECK(docs[0].id == "a");
  CHECK(docs[0].source == "a.txt");
  testutil::spit(dir.file("c.jsonl"), "{\"id\":\"x\",\"text\":\"hello\",\"source\":\"s\"}\n\n{\"id\":\"y\",\"text\":\"bye\"}\n");
  const auto j = load_corpus(dir.file("c.jsonl"));
  CHECK(j.size() == 2);
  CHECK(j[1].source.empty());
  testutil::spit(dir.file("bad.jsonl"), "{\"id\":\"x\",\"text\":\"hello\"}\n{\"id\":3}\n");
  try {
    load_corpus(dir.file("bad.jsonl"));
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_corpus(dir.file("missing.jsonl")), IoError);
  const auto shipped = load_corpus(std::string(CRELAB_DATA_DIR) + "/corpus/notes.jsonl");
  CHECK(shipped.size() == 50);
  CHECK_NOTHROW(RetrievalIndex::build(shipped));
}

TEST_CASE("rag prompt assembly") {
  const auto ix = RetrievalIndex::build({{"d1", "stack brackets", "notes"}, {"d2", "queue bfs", ""}});
  const auto tpl = default_templates();
  ScriptedGenerator g({"out1", "out2", "out3"});
  GenerationRequest base;
  base.prompt = "ignored";
  base.seed = 4;
  const auto r = rag_generate("check brackets with a stack", ix, g, tpl, 1, base);
  CHECK(r.text == "out1");
  CHECK(r.retrieval.hits.size() == 1);
  CHECK(r.prompt.find("[1] d1 (notes)\nstack brackets\n") != std::string::npos);
  CHECK(r.prompt.find("check brackets with a stack") != std::string::npos);
  CHECK(g.requests()[0].purpose == Purpose::rag);
  CHECK(g.requests()[0].seed == 4);

  const auto none = rag_generate("zebra", ix, g, tpl, 2, base);
  CHECK(none.prompt.find(kNoContextBlock) != std::string::npos);

  const auto plain = rag_generate("zebra", ix, g, tpl, 0, base);
  CHECK(plain.prompt == "zebra");
  CHECK(g.requests()[2].purpose == Purpose::plain);
}

// ---- judges ---------------------------------------------------------------

TEST_CASE("technique normalization") {
  CHECK(normalize_technique("Binary  Search.") == "binary-search");
  CHECK(normalize_technique(" hash_map ") == "hash-map");
  CHECK(normalize_technique("Two--Pointers") == "two-pointers");
  CHECK(normalize_technique("C++") == "c++");
  CHECK(normalize_technique("C#!") == "c#");
}

TEST_CASE("rule judge: lexicon on word boundaries") {
  RuleBasedJudge j(Lexicon::parse("# c\nstack: stack | push and pop\nbfs: breadth first search\n"));
  CHECK(j.extract_techniques("We use a STACK here") == std::set<std::string>{"stack"});
  CHECK(j.extract_techniques("the haystacks are big").empty());
  CHECK(j.extract_techniques("Breadth first search, then push and pop.") == std::set<std::string>{"stack", "bfs"});
  CHECK_THROWS(Lexicon::parse("no colon here\n"));
  const auto builtin = Lexicon::builtin();
  const auto file = Lexicon::load(std::string(CRELAB_DATA_DIR) + "/lexicon.txt");
  CHECK(builtin.entries == file.entries);
  CHECK(builtin.entries.size() >= 15);
}

TEST_CASE("rule judge: constraints and coherence") {
  RuleBasedJudge j;
  CHECK(constraint_marker("Mention \"a red kite\" twice.") == "a red kite");
  CHECK(constraint_marker("  include a dog ") == "include a dog");
  const auto cj = j.judge_constraints("There was A Red Kite over the sea.",
                                      {"Mention \"a red kite\".", "Mention \"a lantern\"."});
  CHECK(cj.satisfied == 1);
  CHECK(cj.per_constraint == std::vector<bool>{true, false});
  CHECK_THROWS_AS(j.judge_constraints("x", {}), InputError);
  CHECK(j.judge_coherence("a b c", "a b c").score == 5);
  CHECK(j.judge_coherence("a b", "c d").score == 1);
  CHECK(j.judge_coherence("a b c d", "a b").score == 3);
  CHECK(j.judge_coherence("", "").score == 1);
}

TEST_CASE("judge reply parsers") {
  CHECK(parse_technique_reply("Hash Map\n- two pointers\nnone\n\n") ==
        std::set<std::string>{"hash-map", "two-pointers"});
  CHECK(parse_technique_reply("none").empty());
  CHECK_THROWS_AS(parse_technique_reply("this line is far too long to be a technique name at all really"), JudgeError);
  CHECK(parse_constraint_reply("1: yes\n2: No\n", 2) == std::vector<bool>{true, false});
  CHECK(parse_constraint_reply("yes\nno\nyes", 3) == std::vector<bool>{true, false, true});
  CHECK_THROWS_AS(parse_constraint_reply("1: yes\nno\n", 2), JudgeError);
  CHECK_THROWS_AS(parse_constraint_reply("yes\n", 2), JudgeError);
  try {
    parse_constraint_reply("maybe", 1);
    FAIL("expected JudgeError");
  } catch (const JudgeError& e) {
    CHECK(e.raw_reply() == "maybe");
  }
  CHECK(parse_coherence_reply("Score: 4/5").score == 4);
  const auto clamped = parse_coherence_reply("9");
  CHECK(clamped.score == 5);
  CHECK(clamped.clamped);
  CHECK_FALSE(clamped.warning.empty());
  CHECK(parse_coherence_reply("0").score == 1);
  CHECK_THROWS_AS(parse_coherence_reply("great"), JudgeError);
}

TEST_CASE("generator judge routes through templates") {
  ScriptedGenerator g({"recursion\nstack", "1: yes\n2: no", "3"});
  GeneratorJudge j(g, default_templates());
  CHECK(j.extract_techniques("code") == std::set<std::string>{"recursion", "stack"});
  const auto cj = j.judge_constraints("story", {"c1", "c2"});
  CHECK(cj.satisfied == 1);
  CHECK(j.judge_coherence("story", "ref").score == 3);
  const auto reqs = g.requests();
  CHECK(reqs[0].purpose == Purpose::judge_techniques);
  CHECK(reqs[1].expected_items == 2);
  CHECK(reqs[1].prompt.find("c2") != std::string::npos);
  CHECK(reqs[2].prompt.find("ref") != std::string::npos);
  CHECK(j.name() == "generator:scripted");
}
