#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/json.hpp"

namespace decitool {

/// Whole-file read. Throws IoError naming the path.
std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for CLI use (truncate + write). Throws IoError.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Parses a JSON document; ParseError carries `what` and the parser message.
Json parse_json(std::string_view text, std::string_view what);

/// One JSON value per non-blank line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& rows);

}  // namespace decitool
