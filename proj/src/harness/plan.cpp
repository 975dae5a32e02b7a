#include "crelab/harness/plan.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/keyvalue.hpp"

#include <algorithm>
#include <set>

namespace crelab::harness {

std::vector<int> default_states(DatasetKind kind) {
  if (kind == DatasetKind::neocoder) return {0, 1, 2, 3, 4, 5};
  return {7, 15, 23, 31, 39};
}

std::vector<int> ExperimentPlan::resolved_states() const {
  std::vector<int> s = states.empty() ? default_states(kind) : states;
  std::sort(s.begin(), s.end());
  return s;
}

bool ExperimentPlan::has_method(metrics::Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

void ExperimentPlan::validate() const {
  if (dataset.empty()) throw ConfigError("plan needs a dataset");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (methods.empty()) throw ConfigError("plan needs at least one method");
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      if (methods[i] == methods[j]) {
        throw ConfigError(std::string("method listed twice: ") + metrics::to_string(methods[i]));
      }
    }
  }
  const auto s = resolved_states();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0) throw ConfigError("states must be >= 0");
    if (i && s[i] == s[i - 1]) throw ConfigError("state listed twice: " + std::to_string(s[i]));
  }
  static const std::set<std::string> gens{"mock", "echo", "local", "endpoint"};
  if (!gens.count(generator)) throw ConfigError("unknown generator '" + generator + "'");
  if (judge != "rule" && judge != "generator") throw ConfigError("unknown judge '" + judge + "'");
  if (generator == "local" && model.empty()) throw ConfigError("the local generator needs --model");
  if (has_method(metrics::Method::rag) && corpus.empty()) {
    throw ConfigError("method rag needs --corpus");
  }
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

const std::vector<std::string>& plan_keys() {
  static const std::vector<std::string> keys = {
      "dataset", "kind",      "methods",           "states",    "runs",    "generator",
      "judge",   "checker",   "model",             "probe_report", "corpus", "rag_k",
      "cove_per_question", "templates", "lexicon", "out",       "seed",    "workers",
      "max_cells"};
  return keys;
}

void apply_plan_keys(const KeyValues& kv, ExperimentPlan& p) {
  auto get = [&kv](const char* key) { return kv.get(key); };
  if (auto v = get("dataset")) p.dataset = *v;
  if (auto v = get("kind")) p.kind = parse_dataset_kind(*v);
  if (auto v = get("methods")) p.methods = parse_methods(*v);
  if (auto v = get("states")) p.states = parse_int_list(*v, "states");
  if (auto v = get("runs")) p.runs = static_cast<int>(parse_int(*v, "runs"));
  if (auto v = get("generator")) p.generator = *v;
  if (auto v = get("judge")) p.judge = *v;
  if (auto v = get("checker")) p.checker = *v;
  if (auto v = get("model")) p.model = *v;
  if (auto v = get("probe_report")) p.probe_report = *v;
  if (auto v = get("corpus")) p.corpus = *v;
  if (auto v = get("rag_k")) p.rag_k = parse_uint(*v, "rag_k");
  if (auto v = get("cove_per_question")) p.cove_per_question = parse_bool(*v, "cove_per_question");
  if (auto v = get("templates")) p.templates = *v;
  if (auto v = get("lexicon")) p.lexicon = *v;
  if (auto v = get("out")) p.out = *v;
  if (auto v = get("seed")) p.seed = parse_uint(*v, "seed");
  if (auto v = get("workers")) p.workers = static_cast<unsigned>(parse_uint(*v, "workers"));
  if (auto v = get("max_cells")) p.max_cells = parse_uint(*v, "max_cells");
  decode::apply_decode_keys(kv, p.decode);
}

ExperimentPlan parse_plan(std::string_view text) {
  const KeyValues kv = KeyValues::parse(text);
  std::set<std::string> known(plan_keys().begin(), plan_keys().end());
  for (const auto& k : decode::decode_config_keys()) known.insert(k);
  kv.require_known(known);
  ExperimentPlan p;
  apply_plan_keys(kv, p);
  return p;
}

std::string to_text(const ExperimentPlan& p) {
  std::string out;
  auto line = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("dataset", p.dataset);
  line("kind", to_string(p.kind));
  line("methods", format_methods(p.methods));
  line("states", format_int_list(p.resolved_states()));
  line("runs", std::to_string(p.runs));
  line("generator", p.generator);
  line("judge", p.judge);
  line("checker", p.checker);
  line("model", p.model);
  line("probe_report", p.probe_report);
  line("corpus", p.corpus);
  line("rag_k", std::to_string(p.rag_k));
  line("cove_per_question", p.cove_per_question ? "true" : "false");
  line("templates", p.templates);
  line("lexicon", p.lexicon);
  line("seed", std::to_string(p.seed));
  out += decode::to_text(p.decode);
  return out;
}

std::uint64_t config_hash(const ExperimentPlan& plan) { return fnv1a64(to_text(plan)); }

std::string format_methods(const std::vector<metrics::Method>& methods) {
  std::string out;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (i) out += ',';
    out += metrics::to_string(methods[i]);
  }
  return out;
}

std::vector<metrics::Method> parse_methods(std::string_view text) {
  std::vector<metrics::Method> out;
  for (const auto& item : split(text, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(metrics::parse_method(t));
  }
  return out;
}

std::uint64_t cell_seed(std::uint64_t global_seed, std::string_view problem_id, int state,
                        metrics::Method method, int run) {
  std::uint64_t h = hash_combine(global_seed, fnv1a64(problem_id));
  h = hash_combine(h, static_cast<std::uint64_t>(state));
  h = hash_combine(h, static_cast<std::uint64_t>(method));
  return hash_combine(h, static_cast<std::uint64_t>(run));
}

}  // namespace crelab::harness
