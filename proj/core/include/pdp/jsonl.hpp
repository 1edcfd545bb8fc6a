#pragma once

// Line-delimited JSON record files.
//
// Every file starts with a header line {"kind": "<kind>", "schema_version": N}
// followed by one record object per line. A zero-byte file is a valid empty
// file. Blank lines are skipped. Records may not carry keys outside the
// documented set for their kind.

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pdp {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Parse or schema error, tagged with the file, 1-based line and the byte
/// offset of the start of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, std::size_t offset, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string source_;
  std::size_t line_;
  std::size_t offset_;
};

struct JsonlRecord {
  std::size_t line = 0;
  std::size_t offset = 0;
  Json value;
};

/// Parses a whole JSONL document. `kind` must match the header. A final
/// line without a trailing newline is treated as truncated.
std::vector<JsonlRecord> parse_jsonl(std::string_view text, std::string_view kind,
                                     const std::string& source = "<memory>");

std::vector<JsonlRecord> read_jsonl(const std::filesystem::path& path, std::string_view kind);

/// Header line (with trailing newline) for the given record kind.
std::string jsonl_header(std::string_view kind);

/// Compact single-line dump with a trailing newline.
std::string jsonl_line(const Json& record);

/// Throws std::invalid_argument naming the first key not in `allowed`.
void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        std::string_view what);

/// Writes `content` to `path` atomically enough for report files
/// (truncate + write). Throws std::runtime_error on failure.
void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace pdp
