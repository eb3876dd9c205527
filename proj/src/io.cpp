#include "decitool/io.hpp"

#include <fstream>
#include <sstream>

#include "decitool/error.hpp"

namespace decitool {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Json parse_json(std::string_view text, std::string_view what) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<Json> rows;
    std::size_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        rows.push_back(parse_json(line, path.string() + ":" + std::to_string(line_no)));
    }
    return rows;
}

std::string to_jsonl(const std::vector<Json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace decitool
