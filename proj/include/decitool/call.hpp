#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "decitool/json.hpp"

namespace decitool {

using ArgValue = std::variant<std::string, double, bool>;

/// One API invocation: `name(arg="v", n=3, flag=true)`.
struct CallCommand {
    std::string api_name;
    std::vector<std::pair<std::string, ArgValue>> args;

    const ArgValue* find(std::string_view name) const;

    bool operator==(const CallCommand&) const = default;
};

bool is_identifier(std::string_view text);

/// Parses a complete call command. Only whitespace may follow the closing
/// parenthesis. Throws CallSyntaxError with a byte offset into `text`.
CallCommand parse_call(std::string_view text);

struct PrefixParse {
    CallCommand command;
    std::size_t end;  // offset one past the closing parenthesis
};

/// Parses a call command starting at `start`, ignoring anything after the
/// closing parenthesis. Error offsets are relative to `text`.
PrefixParse parse_call_prefix(std::string_view text, std::size_t start = 0);

/// Canonical text form: `name(a="x", b=1.5, c=true)`.
std::string to_string(const CallCommand& call);
std::string format_value(const ArgValue& value);
std::string format_number(double value);
std::string quote_string(std::string_view raw);

/// Same api_name and the same argument set, independent of argument order.
bool same_call(const CallCommand& a, const CallCommand& b);

Json to_json(const CallCommand& call);
CallCommand call_from_json(const Json& j);
Json to_json(const ArgValue& value);

}  // namespace decitool
