#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"
#include "crelab/common/keyvalue.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace crelab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::input: return "input";
    case ErrorKind::index: return "index";
    case ErrorKind::dataset: return "dataset";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::pipeline: return "pipeline";
    case ErrorKind::judge: return "judge";
    case ErrorKind::load: return "load";
    case ErrorKind::report: return "report";
    case ErrorKind::io: return "io";
    case ErrorKind::backend: return "backend";
    case ErrorKind::internal: return "internal";
  }
  return "unknown";
}

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        line + "'");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    kv.entries_[key] = Entry{trim(std::string_view(line).substr(eq + 1)), line_no};
    if (end == text.size()) break;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValues::set(const std::string& key, std::string value) {
  entries_[key] = Entry{std::move(value), 0};
}

bool KeyValues::contains(const std::string& key) const { return entries_.count(key) != 0; }

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

void KeyValues::require_known(const std::set<std::string>& known) const {
  for (const auto& [key, entry] : entries_) {
    if (!known.count(key)) {
      std::string where = entry.line ? "line " + std::to_string(entry.line) + ": " : "";
      throw ConfigError(where + "unknown key '" + key + "'");
    }
  }
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [key, entry] : entries_) {
    out += key;
    out += " = ";
    out += entry.value;
    out += '\n';
  }
  return out;
}

namespace {

[[noreturn]] void bad_value(std::string_view text, std::string_view key, const char* what) {
  throw ConfigError("invalid " + std::string(what) + " for '" + std::string(key) + "': '" +
                    std::string(text) + "'");
}

}  // namespace

double parse_double(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  double v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(text, key, "number");
  return v;
}

std::int64_t parse_int(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(text, key, "integer");
  return v;
}

std::uint64_t parse_uint(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    bad_value(text, key, "unsigned integer");
  }
  return v;
}

bool parse_bool(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad_value(text, key, "flag");
}

std::vector<int> parse_int_list(std::string_view text, std::string_view key) {
  std::vector<int> out;
  if (trim(text).empty()) return out;
  for (const std::string& item : split(text, ',')) {
    out.push_back(static_cast<int>(parse_int(item, key)));
  }
  return out;
}

std::string format_int_list(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

}  // namespace crelab
