#include "decitool/registry.hpp"

#include <algorithm>
#include <numeric>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/rng.hpp"

namespace decitool {

std::string_view to_string(ParamType type) {
    switch (type) {
        case ParamType::String: return "string";
        case ParamType::Number: return "number";
        case ParamType::Boolean: return "boolean";
    }
    return "string";
}

ParamType param_type_from_string(std::string_view text) {
    if (text == "string") return ParamType::String;
    if (text == "number") return ParamType::Number;
    if (text == "boolean") return ParamType::Boolean;
    throw ValidationError("unknown parameter type '" + std::string(text) + "'");
}

const ParamSpec* FunctionSpec::find(std::string_view name) const {
    for (const auto& p : parameters) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

std::string FunctionSpec::signature() const {
    std::string out = api_name + "(";
    for (std::size_t i = 0; i < parameters.size(); ++i) {
        if (i) out += ", ";
        out += parameters[i].name;
        if (!parameters[i].required) out += "?";
        out += ": ";
        out += to_string(parameters[i].type);
    }
    out += ")";
    if (!returns.empty()) out += " -> " + returns;
    return out;
}

namespace {

void validate_tool(const Tool& tool) {
    if (!is_identifier(tool.name)) {
        throw ValidationError("tool '" + tool.name + "': name is not an identifier");
    }
    if (tool.description.empty()) {
        throw ValidationError("tool '" + tool.name + "': description is empty");
    }
    if (!is_identifier(tool.function.api_name)) {
        throw ValidationError("tool '" + tool.name + "': api_name '" + tool.function.api_name +
                              "' is not an identifier");
    }
    std::vector<std::string> names;
    for (const auto& p : tool.function.parameters) {
        if (!is_identifier(p.name)) {
            throw ValidationError("tool '" + tool.name + "': parameter '" + p.name + "' is not an identifier");
        }
        if (std::find(names.begin(), names.end(), p.name) != names.end()) {
            throw ValidationError("tool '" + tool.name + "': duplicate parameter '" + p.name + "'");
        }
        names.push_back(p.name);
    }
}

}  // namespace

ToolPool::ToolPool(std::vector<Tool> tools) : tools_(std::move(tools)) {
    for (std::size_t i = 0; i < tools_.size(); ++i) {
        const Tool& t = tools_[i];
        validate_tool(t);
        if (!by_name_.emplace(t.name, i).second) {
            throw ValidationError("duplicate tool name '" + t.name + "'");
        }
        // First tool wins if two tools share an api_name.
        by_api_.emplace(t.function.api_name, i);
    }
}

bool ToolPool::contains(std::string_view name) const { return by_name_.count(std::string(name)) > 0; }

const Tool* ToolPool::find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    return it == by_name_.end() ? nullptr : &tools_[it->second];
}

const Tool& ToolPool::at(std::string_view name) const {
    if (const Tool* t = find(name)) return *t;
    throw UnknownTool("unknown tool '" + std::string(name) + "'");
}

const Tool* ToolPool::find_by_api(std::string_view api_name) const {
    auto it = by_api_.find(std::string(api_name));
    return it == by_api_.end() ? nullptr : &tools_[it->second];
}

std::optional<std::size_t> ToolPool::index_of(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

void validate_call(const CallCommand& call, const FunctionSpec& spec) {
    if (call.api_name != spec.api_name) {
        throw InvalidCallArgument("call names '" + call.api_name + "' but the tool's API is '" + spec.api_name + "'");
    }
    for (const auto& [name, value] : call.args) {
        const ParamSpec* p = spec.find(name);
        if (!p) throw InvalidCallArgument("unknown parameter '" + name + "' for " + spec.api_name);
        const bool ok = (p->type == ParamType::String && std::holds_alternative<std::string>(value)) ||
                        (p->type == ParamType::Number && std::holds_alternative<double>(value)) ||
                        (p->type == ParamType::Boolean && std::holds_alternative<bool>(value));
        if (!ok) {
            throw InvalidCallArgument("parameter '" + name + "' of " + spec.api_name + " expects " +
                                      std::string(to_string(p->type)));
        }
    }
    for (const auto& p : spec.parameters) {
        if (p.required && !call.find(p.name)) throw MissingRequiredParam(spec.api_name, p.name);
    }
}

Json to_json(const Tool& tool) {
    Json params = Json::array();
    for (const auto& p : tool.function.parameters) {
        params.push_back({{"name", p.name},
                          {"type", to_string(p.type)},
                          {"required", p.required},
                          {"description", p.description}});
    }
    return Json{{"name", tool.name},
                {"description", tool.description},
                {"function",
                 {{"api_name", tool.function.api_name}, {"parameters", params}, {"returns", tool.function.returns}}}};
}

namespace {

std::string string_field(const Json& j, const char* key, const std::string& who, bool required = true) {
    if (!j.contains(key) || j[key].is_null()) {
        if (required) throw ValidationError(who + ": missing field '" + key + "'");
        return {};
    }
    if (!j[key].is_string()) throw ValidationError(who + ": field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

}  // namespace

Tool tool_from_json(const Json& j) {
    if (!j.is_object()) throw ValidationError("tool entry is not an object");
    Tool tool;
    tool.name = string_field(j, "name", "tool");
    const std::string who = "tool '" + tool.name + "'";
    tool.description = string_field(j, "description", who);
    tool.function.api_name = tool.name;
    if (j.contains("function") && !j["function"].is_null()) {
        const Json& f = j["function"];
        if (!f.is_object()) throw ValidationError(who + ": 'function' must be an object");
        std::string api = string_field(f, "api_name", who, false);
        if (!api.empty()) tool.function.api_name = std::move(api);
        tool.function.returns = string_field(f, "returns", who, false);
        if (f.contains("parameters") && !f["parameters"].is_null()) {
            if (!f["parameters"].is_array()) throw ValidationError(who + ": 'parameters' must be an array");
            for (const auto& pj : f["parameters"]) {
                if (!pj.is_object()) throw ValidationError(who + ": parameter entry is not an object");
                ParamSpec p;
                p.name = string_field(pj, "name", who);
                const std::string type = string_field(pj, "type", who);
                try {
                    p.type = param_type_from_string(type);
                } catch (const ValidationError& e) {
                    throw ValidationError(who + ": " + e.what());
                }
                if (pj.contains("required")) {
                    if (!pj["required"].is_boolean()) throw ValidationError(who + ": 'required' must be a boolean");
                    p.required = pj["required"].get<bool>();
                }
                p.description = string_field(pj, "description", who, false);
                tool.function.parameters.push_back(std::move(p));
            }
        }
    }
    return tool;
}

Json to_json(const ToolPool& pool) {
    Json arr = Json::array();
    for (const auto& t : pool.tools()) arr.push_back(to_json(t));
    return arr;
}

ToolPool pool_from_json(const Json& j) {
    if (!j.is_array()) throw ValidationError("tool pool must be a JSON array");
    std::vector<Tool> tools;
    tools.reserve(j.size());
    for (const auto& entry : j) tools.push_back(tool_from_json(entry));
    return ToolPool(std::move(tools));
}

ToolPool load_pool(const std::filesystem::path& path) {
    return pool_from_json(parse_json(read_text_file(path), path.string()));
}

void save_pool(const ToolPool& pool, const std::filesystem::path& path) {
    write_text_file(path, to_json(pool).dump(2) + "\n");
}

std::pair<ToolPool, ToolPool> split_pool(const ToolPool& pool, std::size_t n_train, std::uint64_t seed) {
    if (n_train == 0 || n_train >= pool.size()) {
        throw RangeError("split_pool: n_train must be in (0, " + std::to_string(pool.size()) + "), got " +
                         std::to_string(n_train));
    }
    Rng rng(seed);
    std::vector<std::size_t> picked = rng.choose(pool.size(), n_train);
    std::vector<bool> in_train(pool.size(), false);
    for (std::size_t i : picked) in_train[i] = true;
    std::vector<Tool> train, test;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        (in_train[i] ? train : test).push_back(pool.tools()[i]);
    }
    return {ToolPool(std::move(train)), ToolPool(std::move(test))};
}

}  // namespace decitool
