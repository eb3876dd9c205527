#include "decitool/call.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <system_error>

#include "decitool/error.hpp"

namespace decitool {

namespace {

bool is_ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class CallParser {
public:
    CallParser(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

    CallCommand parse_command() {
        CallCommand call;
        skip_ws();
        call.api_name = parse_ident("identifier");
        skip_ws();
        expect('(', "'('");
        skip_ws();
        if (peek() == ')') {
            ++pos_;
            return call;
        }
        std::set<std::string, std::less<>> seen;
        while (true) {
            skip_ws();
            const std::size_t name_pos = pos_;
            std::string name = parse_ident(call.args.empty() ? "argument name or ')'" : "argument name");
            if (!seen.insert(name).second) throw CallSyntaxError(name_pos, "unique argument name");
            skip_ws();
            expect('=', "'='");
            skip_ws();
            ArgValue value = parse_value();
            call.args.emplace_back(std::move(name), std::move(value));
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == ')') {
                ++pos_;
                return call;
            }
            throw CallSyntaxError(pos_, "',' or ')'");
        }
    }

    void skip_ws() {
        while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    }

    bool at_end() const { return pos_ >= text_.size(); }
    std::size_t pos() const { return pos_; }

private:
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void expect(char c, const char* what) {
        if (at_end() || text_[pos_] != c) throw CallSyntaxError(pos_, what);
        ++pos_;
    }

    std::string parse_ident(const char* what) {
        if (at_end() || !is_ident_start(text_[pos_])) throw CallSyntaxError(pos_, what);
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    ArgValue parse_value() {
        const char c = peek();
        if (c == '"') return parse_string();
        if (c == '-' || is_digit(c)) return parse_number();
        if (is_ident_start(c)) {
            const std::size_t start = pos_;
            std::size_t end = pos_;
            while (end < text_.size() && is_ident_char(text_[end])) ++end;
            std::string_view word = text_.substr(start, end - start);
            if (word == "true" || word == "false") {
                pos_ = end;
                return word == "true";
            }
        }
        throw CallSyntaxError(pos_, "value");
    }

    double parse_number() {
        const std::size_t start = pos_;
        if (peek() == '-') ++pos_;
        if (!is_digit(peek())) throw CallSyntaxError(pos_, "digit");
        while (is_digit(peek())) ++pos_;
        if (peek() == '.') {
            ++pos_;
            if (!is_digit(peek())) throw CallSyntaxError(pos_, "digit");
            while (is_digit(peek())) ++pos_;
        }
        if (peek() == 'e' || peek() == 'E') {
            ++pos_;
            if (peek() == '+' || peek() == '-') ++pos_;
            if (!is_digit(peek())) throw CallSyntaxError(pos_, "digit");
            while (is_digit(peek())) ++pos_;
        }
        double value = 0.0;
        const char* first = text_.data() + start;
        const char* last = text_.data() + pos_;
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
            throw CallSyntaxError(start, "finite number");
        }
        return value;
    }

    unsigned read_hex4(std::size_t escape_pos) {
        if (pos_ + 4 > text_.size()) throw CallSyntaxError(escape_pos, "valid escape");
        unsigned v = 0;
        for (int i = 0; i < 4; ++i) {
            int h = hex_value(text_[pos_ + i]);
            if (h < 0) throw CallSyntaxError(escape_pos, "valid escape");
            v = (v << 4) | static_cast<unsigned>(h);
        }
        pos_ += 4;
        return v;
    }

    std::string parse_string() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (at_end()) throw CallSyntaxError(pos_, "closing quote");
            const char c = text_[pos_];
            if (c == '"') {
                ++pos_;
                return out;
            }
            if (static_cast<unsigned char>(c) < 0x20) throw CallSyntaxError(pos_, "string character");
            if (c != '\\') {
                out.push_back(c);
                ++pos_;
                continue;
            }
            const std::size_t escape_pos = pos_;
            ++pos_;
            if (at_end()) throw CallSyntaxError(escape_pos, "valid escape");
            const char e = text_[pos_++];
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'u': {
                    char32_t cp = read_hex4(escape_pos);
                    if (cp >= 0xD800 && cp <= 0xDBFF) {
                        if (pos_ + 2 > text_.size() || text_[pos_] != '\\' || text_[pos_ + 1] != 'u') {
                            throw CallSyntaxError(escape_pos, "valid escape");
                        }
                        pos_ += 2;
                        char32_t low = read_hex4(escape_pos);
                        if (low < 0xDC00 || low > 0xDFFF) throw CallSyntaxError(escape_pos, "valid escape");
                        cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
                    } else if (cp >= 0xDC00 && cp <= 0xDFFF) {
                        throw CallSyntaxError(escape_pos, "valid escape");
                    }
                    append_utf8(out, cp);
                    break;
                }
                default:
                    throw CallSyntaxError(escape_pos, "valid escape");
            }
        }
    }

    std::string_view text_;
    std::size_t pos_;
};

}  // namespace

const ArgValue* CallCommand::find(std::string_view name) const {
    for (const auto& [key, value] : args) {
        if (key == name) return &value;
    }
    return nullptr;
}

bool is_identifier(std::string_view text) {
    if (text.empty() || !is_ident_start(text.front())) return false;
    return std::all_of(text.begin(), text.end(), is_ident_char);
}

CallCommand parse_call(std::string_view text) {
    CallParser parser(text, 0);
    CallCommand call = parser.parse_command();
    parser.skip_ws();
    if (!parser.at_end()) throw CallSyntaxError(parser.pos(), "end of input");
    return call;
}

PrefixParse parse_call_prefix(std::string_view text, std::size_t start) {
    CallParser parser(text, start);
    CallCommand call = parser.parse_command();
    return {std::move(call), parser.pos()};
}

std::string quote_string(std::string_view raw) {
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(raw.size() + 2);
    out.push_back('"');
    for (char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default:
                if (u < 0x20 || u == 0x7f) {
                    out += "\\u00";
                    out.push_back(hex[u >> 4]);
                    out.push_back(hex[u & 0xF]);
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
    return out;
}

std::string format_number(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string format_value(const ArgValue& value) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return quote_string(v);
            } else if constexpr (std::is_same_v<T, bool>) {
                return v ? "true" : "false";
            } else {
                return format_number(v);
            }
        },
        value);
}

std::string to_string(const CallCommand& call) {
    std::string out = call.api_name;
    out.push_back('(');
    bool first = true;
    for (const auto& [name, value] : call.args) {
        if (!first) out += ", ";
        first = false;
        out += name;
        out.push_back('=');
        out += format_value(value);
    }
    out.push_back(')');
    return out;
}

bool same_call(const CallCommand& a, const CallCommand& b) {
    if (a.api_name != b.api_name || a.args.size() != b.args.size()) return false;
    std::map<std::string_view, const ArgValue*> lhs;
    for (const auto& [name, value] : a.args) lhs[name] = &value;
    for (const auto& [name, value] : b.args) {
        auto it = lhs.find(name);
        if (it == lhs.end() || !(*it->second == value)) return false;
    }
    return true;
}

Json to_json(const ArgValue& value) {
    return std::visit([](const auto& v) { return Json(v); }, value);
}

Json to_json(const CallCommand& call) {
    Json args = Json::object();
    for (const auto& [name, value] : call.args) args[name] = to_json(value);
    return Json{{"api_name", call.api_name}, {"args", std::move(args)}};
}

CallCommand call_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("api_name") || !j["api_name"].is_string()) {
        throw ParseError("call: expected object with string 'api_name'");
    }
    CallCommand call;
    call.api_name = j["api_name"].get<std::string>();
    if (!is_identifier(call.api_name)) throw ParseError("call: api_name '" + call.api_name + "' is not an identifier");
    if (j.contains("args") && !j["args"].is_null()) {
        if (!j["args"].is_object()) throw ParseError("call: 'args' must be an object");
        for (const auto& [name, value] : j["args"].items()) {
            if (!is_identifier(name)) throw ParseError("call: argument name '" + name + "' is not an identifier");
            if (value.is_string()) {
                call.args.emplace_back(name, value.get<std::string>());
            } else if (value.is_boolean()) {
                call.args.emplace_back(name, value.get<bool>());
            } else if (value.is_number()) {
                call.args.emplace_back(name, value.get<double>());
            } else {
                throw ParseError("call: argument '" + name + "' must be a string, number or boolean");
            }
        }
    }
    return call;
}

}  // namespace decitool
