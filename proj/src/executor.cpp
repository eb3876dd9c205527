#include "decitool/executor.hpp"

#include <cstdlib>

#include "decitool/error.hpp"
#include "decitool/io.hpp"

namespace decitool {

std::string_view to_string(BindingKind kind) {
    switch (kind) {
        case BindingKind::Mock: return "mock";
        case BindingKind::HttpGet: return "http-get";
        case BindingKind::HttpJson: return "http-json";
    }
    return "mock";
}

ApiExecutor::ApiExecutor(std::map<std::string, ApiBinding> bindings, ExecutorOptions options)
    : bindings_(std::move(bindings)), options_(std::move(options)) {
    for (const auto& [name, b] : bindings_) {
        if (!is_identifier(name)) throw ConfigError("executor: '" + name + "' is not an identifier");
        if (b.kind == BindingKind::Mock && !b.canned) {
            throw ConfigError("executor: mock binding for '" + name + "' needs 'canned'");
        }
        if (b.kind != BindingKind::Mock && !b.url_template) {
            throw ConfigError("executor: " + std::string(to_string(b.kind)) + " binding for '" + name +
                              "' needs 'url_template'");
        }
    }
}

ApiExecutor::ApiExecutor(const ApiExecutor& other)
    : bindings_(other.bindings_), specs_(other.specs_), options_(other.options_), executions_(other.executions()) {}

ApiExecutor& ApiExecutor::operator=(const ApiExecutor& other) {
    bindings_ = other.bindings_;
    specs_ = other.specs_;
    options_ = other.options_;
    executions_ = other.executions();
    return *this;
}

ApiExecutor ApiExecutor::from_json(const Json& j, ExecutorOptions options) {
    if (!j.is_object()) throw ConfigError("executor registry must be a JSON object");
    std::map<std::string, ApiBinding> bindings;
    for (const auto& [name, bj] : j.items()) {
        if (!bj.is_object()) throw ConfigError("executor: entry '" + name + "' is not an object");
        ApiBinding b;
        const std::string kind = bj.value("binding", std::string("mock"));
        if (kind == "mock") {
            b.kind = BindingKind::Mock;
        } else if (kind == "http-get") {
            b.kind = BindingKind::HttpGet;
        } else if (kind == "http-json") {
            b.kind = BindingKind::HttpJson;
        } else {
            throw ConfigError("executor: unknown binding '" + kind + "' for '" + name + "'");
        }
        auto opt_string = [&](const char* key) -> std::optional<std::string> {
            if (!bj.contains(key) || bj[key].is_null()) return std::nullopt;
            if (!bj[key].is_string()) throw ConfigError("executor: '" + name + "." + key + "' must be a string");
            return bj[key].get<std::string>();
        };
        b.url_template = opt_string("url_template");
        b.canned = opt_string("canned");
        b.body_template = opt_string("body_template");
        if (bj.contains("headers") && !bj["headers"].is_null()) {
            for (const auto& [hk, hv] : bj["headers"].items()) {
                if (!hv.is_string()) throw ConfigError("executor: header values must be strings");
                b.headers[hk] = hv.get<std::string>();
            }
        }
        bindings.emplace(name, std::move(b));
    }
    return ApiExecutor(std::move(bindings), std::move(options));
}

ApiExecutor ApiExecutor::load(const std::filesystem::path& path, ExecutorOptions options) {
    return from_json(parse_json(read_text_file(path), path.string()), std::move(options));
}

ApiExecutor ApiExecutor::mock_all(const ToolPool& pool, std::string canned, ExecutorOptions options) {
    std::map<std::string, ApiBinding> bindings;
    for (const auto& t : pool.tools()) {
        ApiBinding b;
        b.canned = canned;
        bindings.emplace(t.function.api_name, std::move(b));
    }
    ApiExecutor exec(std::move(bindings), std::move(options));
    exec.bind_specs(pool);
    return exec;
}

void ApiExecutor::bind_specs(const ToolPool& pool) {
    for (const auto& t : pool.tools()) specs_.emplace(t.function.api_name, t.function);
}

bool ApiExecutor::has(std::string_view api_name) const { return bindings_.count(std::string(api_name)) > 0; }

std::string truncate_utf8(std::string_view text, std::size_t limit, bool* truncated) {
    if (truncated) *truncated = text.size() > limit;
    if (text.size() <= limit) return std::string(text);
    std::size_t cut = limit;
    // Step back over continuation bytes so the cut lands on a sequence start.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return std::string(text.substr(0, cut));
}

namespace {

std::string json_escape_inner(std::string_view s) {
    std::string quoted = Json(std::string(s)).dump();
    return quoted.substr(1, quoted.size() - 2);
}

std::string value_text(const ArgValue& v) {
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
    return format_number(std::get<double>(v));
}

}  // namespace

std::string fill_template(std::string_view tmpl, const CallCommand& call, const FunctionSpec* spec,
                          TemplateEscape escape) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        const char c = tmpl[i];
        if (c == '$' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            const auto close = tmpl.find('}', i + 2);
            if (close != std::string_view::npos) {
                std::string var(tmpl.substr(i + 2, close - i - 2));
                if (is_identifier(var)) {
                    const char* env = std::getenv(var.c_str());
                    out += env ? env : "";
                    i = close + 1;
                    continue;
                }
            }
        }
        if (c == '{') {
            const auto close = tmpl.find('}', i + 1);
            if (close != std::string_view::npos) {
                std::string_view name = tmpl.substr(i + 1, close - i - 1);
                const ArgValue* v = call.find(name);
                const bool declared = spec && spec->find(name);
                if (is_identifier(name) && (v || declared)) {
                    std::string text = v ? value_text(*v) : std::string();
                    switch (escape) {
                        case TemplateEscape::Url: out += percent_encode(text); break;
                        case TemplateEscape::JsonString:
                            out += (v && !std::holds_alternative<std::string>(*v)) ? text : json_escape_inner(text);
                            break;
                        case TemplateEscape::None: out += text; break;
                    }
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

ApiResponse ApiExecutor::execute(const CallCommand& call) const {
    auto it = bindings_.find(call.api_name);
    if (it == bindings_.end()) throw UnknownApi("no executor binding for API '" + call.api_name + "'");
    const FunctionSpec* spec = nullptr;
    if (auto s = specs_.find(call.api_name); s != specs_.end()) {
        spec = &s->second;
        validate_call(call, *spec);
    }
    ++executions_;
    const ApiBinding& b = it->second;
    ApiResponse out;

    if (b.kind == BindingKind::Mock) {
        out.status = 200;
        out.body = truncate_utf8(fill_template(*b.canned, call, spec, TemplateEscape::None), options_.byte_limit,
                                 &out.truncated);
        return out;
    }

    HttpRequest req;
    req.url = fill_template(*b.url_template, call, spec, TemplateEscape::Url);
    for (const auto& [k, v] : b.headers) req.headers[k] = fill_template(v, call, spec, TemplateEscape::None);
    if (b.kind == BindingKind::HttpJson) {
        req.method = "POST";
        if (b.body_template) {
            req.body = fill_template(*b.body_template, call, spec, TemplateEscape::JsonString);
        } else {
            req.body = to_json(call)["args"].dump();
        }
    }
    try {
        HttpResponse resp = send_with_retries(req, options_.http);
        out.status = resp.status;
        out.latency = resp.latency;
        out.body = truncate_utf8(resp.body, options_.byte_limit, &out.truncated);
        return out;
    } catch (const HttpError& e) {
        throw UpstreamError(e.status(), "API '" + call.api_name + "' failed: " + e.what());
    } catch (const BackendError& e) {
        throw UpstreamError(0, "API '" + call.api_name + "' failed: " + e.what());
    }
}

ApiResponse execute_api(const ApiExecutor& executor, const CallCommand& call) { return executor.execute(call); }

}  // namespace decitool
