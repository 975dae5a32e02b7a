#include "crelab/common/error.hpp"
#include "crelab/probes/dataset.hpp"
#include "crelab/probes/report.hpp"
#include "crelab/probes/train.hpp"
#include "crelab/tinylm/tokenizer.hpp"

#include "../support/planted.hpp"
#include "../support/test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace crelab;
using namespace crelab::probes;

TEST_CASE("median split labels") {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.5, 0.2};
  CHECK(median_split_labels(s) == std::vector<int>{0, 1, 0, 0, 0});
  const std::vector<double> even{1, 2, 3, 4};
  CHECK(median_split_labels(even) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("conditioning length floors") {
  CHECK(conditioning_length(10, 0.4) == 4);
  CHECK(conditioning_length(9, 0.4) == 3);
  CHECK(conditioning_length(0, 0.4) == 0);
  CHECK(conditioning_length(7, 1.0) == 7);
}

TEST_CASE("split indices partition and are seeded") {
  const auto a = split_indices(101, 0.8, 3);
  const auto b = split_indices(101, 0.8, 3);
  CHECK(a.train == b.train);
  CHECK(a.train.size() == 81);
  CHECK(a.validation.size() == 20);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  CHECK(all.size() == 101);
  CHECK(split_indices(101, 0.8, 4).train != a.train);
}

TEST_CASE("layer set selection") {
  const std::vector<double> s{0.5, 0.9, 0.7, 0.9, 0.1, 0.6};
  const auto [a, b] = select_layer_sets(s);
  CHECK(a == std::vector<int>{2, 3, 4});
  std::set<int> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  CHECK(sb == std::set<int>{6, 1, 5});
  const std::vector<double> twelve(12, 0.5);
  const auto [a12, b12] = select_layer_sets(twelve);
  CHECK(a12.size() == 5);
  CHECK(b12.size() == 5);
  CHECK(a12 == std::vector<int>{1, 2, 3, 4, 5});
  CHECK_THROWS_AS(select_layer_sets(std::vector<double>{0.5}), ConfigError);
}

TEST_CASE("aggregate to layers is the row mean") {
  const HeadScores h{{0.5, 1.0}, {0.25, 0.75}};
  CHECK(aggregate_to_layers(h) == std::vector<double>{0.75, 0.5});
}

TEST_CASE("report text round trip and model pinning") {
  ProbeGeometry g{4, 2, 3};
  const HeadScores h{{0.5, 0.6}, {0.9, 0.8}, {0.4, 0.45}, {0.7, 0.7}};
  const auto r = make_report(h, g, "tlm-abc");
  CHECK(r.layer_scores.size() == 4);
  CHECK(r.set_A == std::vector<int>{2, 4});
  const auto back = parse_probe_report(to_text(r));
  CHECK(back.geometry == r.geometry);
  CHECK(back.head_scores == r.head_scores);
  CHECK(back.set_A == r.set_A);
  CHECK(back.set_B == r.set_B);
  CHECK(back.source_model_id == "tlm-abc");
  CHECK(check_model_specificity(r, "tlm-abc"));
  CHECK_FALSE(check_model_specificity(r, "tlm-abd"));
  decode::DecodeConfig c;
  apply_probe_report(r, "tlm-abc", c);
  CHECK(c.set_A == r.set_A);
  CHECK(c.probe_model_id == "tlm-abc");
  CHECK_THROWS_AS(apply_probe_report(r, "tlm-xyz", c), ConfigError);
  CHECK_THROWS_AS(parse_probe_report("hello\n"), LoadError);
  std::string t = to_text(r);
  t.replace(t.find("set_B"), 5, "set_Q");
  CHECK_THROWS_AS(parse_probe_report(t), LoadError);
}

TEST_CASE("probe dataset validation") {
  auto ds = testutil::planted_dataset({2, 2, 4}, 10, 0, 0, 1);
  CHECK_NOTHROW(ds.validate());
  for (auto& e : ds.examples) e.label = 1;
  CHECK_THROWS_AS(ds.validate(), DatasetError);
  ds = testutil::planted_dataset({2, 2, 4}, 10, 0, 0, 1);
  ds.examples[3].features.pop_back();
  CHECK_THROWS_AS(ds.validate(), DatasetError);
  CHECK(ds.head(0, 1, 1).size() == 4);
}

TEST_CASE("planted head is found; thread count does not matter") {
  const ProbeGeometry g{4, 2, 6};
  const auto ds = testutil::planted_dataset(g, 400, 2, 0, 17);
  const auto one = train_head_probes(ds, 5, {}, 1);
  const auto many = train_head_probes(ds, 5, {}, 3);
  CHECK(one.head_scores == many.head_scores);
  CHECK(one.head_scores[2][0] >= 0.95);
  const auto r = make_report(one.head_scores, g, ds.source_model_id);
  CHECK(std::find(r.set_A.begin(), r.set_A.end(), 3) != r.set_A.end());
  const auto rescored = score_probes(one.probes, ds, one.split.validation);
  CHECK(rescored == one.head_scores);
}

TEST_CASE("dataset from a model has the model geometry") {
  tinylm::ModelConfig mc;
  mc.n_layers = 2;
  mc.n_heads = 2;
  mc.d_model = 8;
  mc.d_head = 4;
  mc.max_seq_len = 16;
  const auto m = tinylm::Model::init(mc);
  std::vector<ProbeSource> src;
  for (int i = 0; i < 8; ++i) src.push_back({"p" + std::to_string(i), "output text number " + std::to_string(i), i * 0.1});
  const auto ds = build_probe_dataset(src, m, 0.5);
  CHECK(ds.geometry == geometry_of(mc));
  CHECK(ds.examples.size() == 8);
  CHECK(ds.source_model_id == m.id());
  CHECK(ds.examples[0].label == 0);
  CHECK(ds.examples[7].label == 1);
  const auto ctx = conditioning_context(src[0], mc, 0.5);
  CHECK(ctx.front() == tinylm::Tokenizer::kBos);
  CHECK(ctx.size() == 1 + 2 + 10);
  for (auto& s : src) s.divergent_score = 1.0;
  CHECK_THROWS_AS(build_probe_dataset(src, m, 0.5), DatasetError);
  src[0].output = std::string(100, 'x');
  CHECK(conditioning_context(src[0], mc, 1.0).size() == 16);
}
