#pragma once

#include "crelab/metrics/records.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace crelab::harness {

/// One JSON object on one line (no trailing newline). Keys are emitted in a
/// fixed order so equal records serialize to equal bytes.
std::string record_to_json(const metrics::GenerationRecord& record);

/// Throws LoadError (line 0) on schema errors.
metrics::GenerationRecord record_from_json(std::string_view line);

std::string records_to_jsonl(const std::vector<metrics::GenerationRecord>& records);

struct ArchiveContents {
  std::vector<metrics::GenerationRecord> records;
  /// Byte length of the complete lines; a torn final line (no newline, or
  /// unparseable and last) is left out.
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
};

/// Reads a JSON-lines archive; a missing file yields no records.
ArchiveContents read_archive(const std::string& path);

/// Parses JSON-lines text with the same torn-tail rule.
ArchiveContents parse_archive(std::string_view text);

}  // namespace crelab::harness
