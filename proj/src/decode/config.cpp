#include "crelab/decode/config.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace crelab::decode {

namespace {

std::string format_float(float v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : "nan";
}

void check_layers(const std::vector<int>& layers, int lo, int hi, const char* name) {
  std::set<int> seen;
  for (int l : layers) {
    if (l < lo || l > hi) {
      throw ConfigError(std::string(name) + " contains layer " + std::to_string(l) +
                        " outside " + std::to_string(lo) + ".." + std::to_string(hi));
    }
    if (!seen.insert(l).second) {
      throw ConfigError(std::string(name) + " lists layer " + std::to_string(l) + " twice");
    }
  }
}

}  // namespace

const char* to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::dola: return "dola";
    case Strategy::creative_dola: return "creative_dola";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  for (Strategy s : {Strategy::baseline, Strategy::dola, Strategy::creative_dola}) {
    if (text == to_string(s)) return s;
  }
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

float DecodeConfig::gamma_for(int layer) const {
  auto it = gamma.find(layer);
  return it == gamma.end() ? gamma_default : it->second;
}

std::vector<int> default_candidate_layers(int n_layers) {
  std::vector<int> out;
  for (int l = 2; l < n_layers; l += 2) out.push_back(l);
  return out;
}

std::vector<int> DecodeConfig::resolved_candidates(int n_layers) const {
  return candidate_layers.empty() ? default_candidate_layers(n_layers) : candidate_layers;
}

void DecodeConfig::validate(int n_layers) const {
  if (!(beta > 0.0f && beta <= 1.0f)) throw ConfigError("beta must lie in (0, 1]");
  if (!(alpha >= 0.0f)) throw ConfigError("alpha must be >= 0");
  if (!(temperature > 0.0f)) throw ConfigError("temperature must be > 0");
  if (!(top_p > 0.0f && top_p <= 1.0f)) throw ConfigError("top_p must lie in (0, 1]");
  if (strategy == Strategy::baseline) return;

  const std::vector<int> cands = resolved_candidates(n_layers);
  if (cands.empty()) {
    throw ConfigError("no premature-layer candidates for a " + std::to_string(n_layers) +
                      "-layer model");
  }
  check_layers(cands, 1, n_layers - 1, "candidate_layers");
  if (strategy == Strategy::creative_dola) {
    check_layers(set_A, 1, n_layers, "set_A");
    check_layers(set_B, 1, n_layers, "set_B");
    for (int a : set_A) {
      if (std::find(set_B.begin(), set_B.end(), a) != set_B.end()) {
        throw ConfigError("set_A and set_B overlap at layer " + std::to_string(a));
      }
    }
    for (const auto& [layer, g] : gamma) {
      if (layer < 1 || layer > n_layers) throw ConfigError("gamma given for unknown layer");
      (void)g;
    }
  }
}

const std::vector<std::string>& decode_config_keys() {
  static const std::vector<std::string> keys = {
      "strategy", "candidate_layers", "beta",        "alpha",    "gamma",
      "set_A",    "set_B",            "max_new_tokens", "temperature", "top_p",
      "do_sample", "rng_seed",        "probe_model_id"};
  return keys;
}

std::string format_gamma(const DecodeConfig& c) {
  std::string out = format_float(c.gamma_default);
  for (const auto& [layer, g] : c.gamma) out += "," + std::to_string(layer) + ":" + format_float(g);
  return out;
}

void parse_gamma(std::string_view text, DecodeConfig& c) {
  c.gamma.clear();
  for (const std::string& item : split(text, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      c.gamma_default = static_cast<float>(parse_double(item, "gamma"));
    } else {
      const int layer = static_cast<int>(parse_int(item.substr(0, colon), "gamma"));
      c.gamma[layer] = static_cast<float>(parse_double(item.substr(colon + 1), "gamma"));
    }
  }
}

void apply_decode_keys(const KeyValues& kv, DecodeConfig& c) {
  auto get = [&kv](const char* key) { return kv.get(key); };
  if (auto v = get("strategy")) c.strategy = parse_strategy(*v);
  if (auto v = get("candidate_layers")) c.candidate_layers = parse_int_list(*v, "candidate_layers");
  if (auto v = get("beta")) c.beta = static_cast<float>(parse_double(*v, "beta"));
  if (auto v = get("alpha")) c.alpha = static_cast<float>(parse_double(*v, "alpha"));
  if (auto v = get("gamma")) parse_gamma(*v, c);
  if (auto v = get("set_A")) c.set_A = parse_int_list(*v, "set_A");
  if (auto v = get("set_B")) c.set_B = parse_int_list(*v, "set_B");
  if (auto v = get("max_new_tokens")) c.max_new_tokens = parse_uint(*v, "max_new_tokens");
  if (auto v = get("temperature")) c.temperature = static_cast<float>(parse_double(*v, "temperature"));
  if (auto v = get("top_p")) c.top_p = static_cast<float>(parse_double(*v, "top_p"));
  if (auto v = get("do_sample")) c.do_sample = parse_bool(*v, "do_sample");
  if (auto v = get("rng_seed")) c.rng_seed = parse_uint(*v, "rng_seed");
  if (auto v = get("probe_model_id")) c.probe_model_id = *v;
}

std::string to_text(const DecodeConfig& c) {
  std::string out;
  auto line = [&out](const char* key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("strategy", to_string(c.strategy));
  line("candidate_layers", format_int_list(c.candidate_layers));
  line("beta", format_float(c.beta));
  line("alpha", format_float(c.alpha));
  line("gamma", format_gamma(c));
  line("set_A", format_int_list(c.set_A));
  line("set_B", format_int_list(c.set_B));
  line("max_new_tokens", std::to_string(c.max_new_tokens));
  line("temperature", format_float(c.temperature));
  line("top_p", format_float(c.top_p));
  line("do_sample", c.do_sample ? "true" : "false");
  line("rng_seed", std::to_string(c.rng_seed));
  line("probe_model_id", c.probe_model_id);
  return out;
}

DecodeConfig parse_decode_config(std::string_view text) {
  const KeyValues kv = KeyValues::parse(text);
  const auto& keys = decode_config_keys();
  kv.require_known(std::set<std::string>(keys.begin(), keys.end()));
  DecodeConfig c;
  apply_decode_keys(kv, c);
  return c;
}

}  // namespace crelab::decode
