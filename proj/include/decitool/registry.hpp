#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "decitool/call.hpp"
#include "decitool/json.hpp"

namespace decitool {

enum class ParamType { String, Number, Boolean };

std::string_view to_string(ParamType type);
ParamType param_type_from_string(std::string_view text);

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::String;
    bool required = false;
    std::string description;

    bool operator==(const ParamSpec&) const = default;
};

struct FunctionSpec {
    std::string api_name;
    std::vector<ParamSpec> parameters;
    std::string returns;

    const ParamSpec* find(std::string_view name) const;
    /// `name(city: string, units?: string) -> returns`
    std::string signature() const;

    bool operator==(const FunctionSpec&) const = default;
};

struct Tool {
    std::string name;
    std::string description;
    FunctionSpec function;

    bool operator==(const Tool&) const = default;
};

/// Validated, immutable set of tools with unique names.
class ToolPool {
public:
    ToolPool() = default;
    /// Throws ValidationError naming the first offending tool.
    explicit ToolPool(std::vector<Tool> tools);

    const std::vector<Tool>& tools() const { return tools_; }
    std::size_t size() const { return tools_.size(); }
    bool empty() const { return tools_.empty(); }

    bool contains(std::string_view name) const;
    const Tool* find(std::string_view name) const;
    /// Throws UnknownTool.
    const Tool& at(std::string_view name) const;
    /// Tool whose FunctionSpec.api_name equals `api_name`, if any.
    const Tool* find_by_api(std::string_view api_name) const;
    std::optional<std::size_t> index_of(std::string_view name) const;

    bool operator==(const ToolPool& other) const { return tools_ == other.tools_; }

private:
    std::vector<Tool> tools_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::unordered_map<std::string, std::size_t> by_api_;
};

/// Checks a call against a function signature: every required parameter
/// present, no unknown parameters, and value types matching the tags.
/// Throws MissingRequiredParam or InvalidCallArgument.
void validate_call(const CallCommand& call, const FunctionSpec& spec);

Json to_json(const Tool& tool);
Tool tool_from_json(const Json& j);
Json to_json(const ToolPool& pool);
ToolPool pool_from_json(const Json& j);

ToolPool load_pool(const std::filesystem::path& path);
void save_pool(const ToolPool& pool, const std::filesystem::path& path);

/// Seeded uniform split. The first part holds n_train tools; both parts keep
/// the pool's original relative order. Throws RangeError unless 0 < n_train < N.
std::pair<ToolPool, ToolPool> split_pool(const ToolPool& pool, std::size_t n_train, std::uint64_t seed);

}  // namespace decitool
