#include "pdp/jsonl.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pdp {

ParseError::ParseError(std::string source, std::size_t line, std::size_t offset,
                       const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + " (offset " +
                         std::to_string(offset) + "): " + what),
      source_(std::move(source)),
      line_(line),
      offset_(offset) {}

std::vector<JsonlRecord> parse_jsonl(std::string_view text, std::string_view kind,
                                     const std::string& source) {
  std::vector<JsonlRecord> out;
  if (text.empty()) return out;

  bool saw_header = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t start = pos;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw ParseError(source, line_no, start, "truncated record (missing newline)");
    }
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; })) {
      continue;
    }

    Json value;
    try {
      value = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(source, line_no, start, std::string("invalid JSON: ") + e.what());
    }
    if (!value.is_object()) throw ParseError(source, line_no, start, "record is not an object");

    if (!saw_header) {
      try {
        require_known_keys(value, {"kind", "schema_version"}, "header");
        const auto k = value.at("kind").get<std::string>();
        const int version = value.at("schema_version").get<int>();
        if (k != kind) {
          throw std::invalid_argument("expected kind '" + std::string(kind) + "', got '" + k + "'");
        }
        if (version != kSchemaVersion) {
          throw std::invalid_argument("unsupported schema_version " + std::to_string(version));
        }
      } catch (const std::exception& e) {
        throw ParseError(source, line_no, start, std::string("bad header: ") + e.what());
      }
      saw_header = true;
      continue;
    }
    out.push_back({line_no, start, std::move(value)});
  }
  if (!saw_header) throw ParseError(source, line_no, 0, "missing header");
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<JsonlRecord> read_jsonl(const std::filesystem::path& path, std::string_view kind) {
  return parse_jsonl(read_file(path), kind, path.string());
}

std::string jsonl_header(std::string_view kind) {
  return jsonl_line(Json{{"kind", kind}, {"schema_version", kSchemaVersion}});
}

std::string jsonl_line(const Json& record) { return record.dump() + "\n"; }

void require_known_keys(const Json& object, std::initializer_list<std::string_view> allowed,
                        std::string_view what) {
  for (const auto& [key, _] : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw std::invalid_argument("unknown field '" + key + "' in " + std::string(what));
    }
  }
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace pdp
