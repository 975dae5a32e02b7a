#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace crelab {

/// Plain-text `key = value` configuration, one entry per line. Blank lines and
/// lines starting with '#' are ignored. Later duplicates override earlier ones.
class KeyValues {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);

  void set(const std::string& key, std::string value);
  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  std::string to_text() const;

 private:
  std::map<std::string, Entry> entries_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Value parsers; `key` is used only for error messages.
double parse_double(std::string_view text, std::string_view key);
std::int64_t parse_int(std::string_view text, std::string_view key);
std::uint64_t parse_uint(std::string_view text, std::string_view key);
bool parse_bool(std::string_view text, std::string_view key);
std::vector<int> parse_int_list(std::string_view text, std::string_view key);
std::string format_int_list(const std::vector<int>& values);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double value);

}  // namespace crelab
