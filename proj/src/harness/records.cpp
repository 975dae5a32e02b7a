#include "crelab/harness/records.hpp"

#include "crelab/common/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace crelab::harness {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json optional_int(const std::optional<int>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<int> read_optional_int(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number_integer()) throw LoadError(0, std::string("judge.") + key + " must be an integer");
  return j.at(key).get<int>();
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw LoadError(0, std::string("record is missing '") + key + "'");
  return j.at(key);
}

std::set<std::string> string_set(const json& v, const char* key) {
  if (!v.is_array()) throw LoadError(0, std::string("'") + key + "' must be an array");
  std::set<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw LoadError(0, std::string("'") + key + "' must contain strings");
    out.insert(e.get<std::string>());
  }
  return out;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c >> 4) == 0xe) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c >> 3) == 0x1e) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10ffff || (cp >= 0xd800 && cp <= 0xdfff)) {
      return false;
    }
    i += len;
  }
  return true;
}

std::string hex_encode(std::string_view s) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    out += kDigits[c >> 4];
    out += kDigits[c & 0xf];
  }
  return out;
}

std::string hex_decode(const std::string& h) {
  if (h.size() % 2) throw LoadError(0, "output_hex has odd length");
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw LoadError(0, "output_hex has a non-hex digit");
  };
  std::string out;
  for (std::size_t i = 0; i < h.size(); i += 2) {
    out += static_cast<char>(nib(h[i]) * 16 + nib(h[i + 1]));
  }
  return out;
}

}  // namespace

std::string record_to_json(const metrics::GenerationRecord& r) {
  ordered_json j;
  j["problem_id"] = r.problem_id;
  j["state"] = r.state_t;
  j["method"] = metrics::to_string(r.method);
  j["run"] = r.run_index;
  j["seed"] = r.seed;
  j["status"] = r.ok() ? "ok" : "failed";
  j["error"] = r.error;
  if (valid_utf8(r.output_text)) {
    j["output"] = r.output_text;
  } else {
    j["output_hex"] = hex_encode(r.output_text);
  }
  j["techniques"] = r.techniques;
  j["constraints_violated"] = r.constraints_violated;
  j["verdict"] = metrics::to_string(r.verdict);
  j["judge"] = ordered_json{{"coherence", optional_int(r.judge.coherence)},
                            {"satisfied", optional_int(r.judge.satisfied)},
                            {"total", optional_int(r.judge.total)}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

metrics::GenerationRecord record_from_json(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw LoadError(0, "record is not a JSON object");
  metrics::GenerationRecord r;
  try {
    r.problem_id = field(j, "problem_id").get<std::string>();
    r.state_t = field(j, "state").get<int>();
    r.method = metrics::parse_method(field(j, "method").get<std::string>());
    r.run_index = field(j, "run").get<int>();
    r.seed = field(j, "seed").get<std::uint64_t>();
    r.error = field(j, "error").get<std::string>();
    r.output_text = j.contains("output_hex") ? hex_decode(j.at("output_hex").get<std::string>())
                                             : field(j, "output").get<std::string>();
    r.techniques = string_set(field(j, "techniques"), "techniques");
    r.constraints_violated = string_set(field(j, "constraints_violated"), "constraints_violated");
    r.verdict = metrics::parse_verdict(field(j, "verdict").get<std::string>());
    const json& judge = field(j, "judge");
    if (!judge.is_object()) throw LoadError(0, "'judge' must be an object");
    r.judge.coherence = read_optional_int(judge, "coherence");
    r.judge.satisfied = read_optional_int(judge, "satisfied");
    r.judge.total = read_optional_int(judge, "total");
  } catch (const json::exception& e) {
    throw LoadError(0, std::string("bad record field: ") + e.what());
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    throw LoadError(0, e.what());
  }
  for (const auto& v : r.constraints_violated) {
    if (!r.techniques.count(v)) throw LoadError(0, "constraints_violated is not a subset of techniques");
  }
  return r;
}

std::string records_to_jsonl(const std::vector<metrics::GenerationRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r);
    out += '\n';
  }
  return out;
}

ArchiveContents parse_archive(std::string_view text) {
  ArchiveContents out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      out.torn_tail = true;
      break;
    }
    const std::string_view line = text.substr(pos, nl - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.records.push_back(record_from_json(line));
      } catch (const LoadError& e) {
        if (nl + 1 == text.size()) {
          out.torn_tail = true;
          break;
        }
        throw LoadError(line_no, e.what());
      }
    }
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

ArchiveContents read_archive(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read archive '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_archive(ss.str());
}

}  // namespace crelab::harness
