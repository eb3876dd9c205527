#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "decitool/call.hpp"
#include "decitool/http.hpp"
#include "decitool/json.hpp"
#include "decitool/registry.hpp"

namespace decitool {

struct ApiResponse {
    int status = 200;
    std::string body;
    std::chrono::milliseconds latency{0};
    bool truncated = false;
};

enum class BindingKind { Mock, HttpGet, HttpJson };

std::string_view to_string(BindingKind kind);

/// How one api_name is served. Templates use `{param}` placeholders and
/// `${ENV_VAR}` for secrets.
struct ApiBinding {
    BindingKind kind = BindingKind::Mock;
    std::optional<std::string> url_template;
    std::optional<std::string> canned;
    /// http-json only; when absent the call arguments are posted as an object.
    std::optional<std::string> body_template;
    std::map<std::string, std::string> headers;
};

struct ExecutorOptions {
    std::size_t byte_limit = 4096;
    HttpOptions http;
};

class ApiExecutor {
public:
    ApiExecutor() = default;
    explicit ApiExecutor(std::map<std::string, ApiBinding> bindings, ExecutorOptions options = {});

    /// Registry file: {api_name: {"binding", "url_template", "canned", "headers", "body_template"}}.
    static ApiExecutor from_json(const Json& j, ExecutorOptions options = {});
    static ApiExecutor load(const std::filesystem::path& path, ExecutorOptions options = {});
    /// Mock binding with the same canned body for every API in the pool.
    static ApiExecutor mock_all(const ToolPool& pool, std::string canned, ExecutorOptions options = {});

    /// Enables argument validation against the pool's signatures.
    void bind_specs(const ToolPool& pool);

    bool has(std::string_view api_name) const;
    const ExecutorOptions& options() const { return options_; }

    /// Throws UnknownApi, MissingRequiredParam, InvalidCallArgument, UpstreamError.
    ApiResponse execute(const CallCommand& call) const;

    /// Successful and failed executions attempted so far.
    long executions() const { return executions_.load(); }

private:
    std::map<std::string, ApiBinding> bindings_;
    std::unordered_map<std::string, FunctionSpec> specs_;
    ExecutorOptions options_;
    mutable std::atomic<long> executions_{0};

public:
    ApiExecutor(const ApiExecutor& other);
    ApiExecutor& operator=(const ApiExecutor& other);
};

ApiResponse execute_api(const ApiExecutor& executor, const CallCommand& call);

/// Cuts to at most `limit` bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string_view text, std::size_t limit, bool* truncated = nullptr);

enum class TemplateEscape { None, Url, JsonString };

/// Replaces `{param}` with the argument's text (empty when an optional
/// argument is absent) and `${VAR}` with the environment variable.
std::string fill_template(std::string_view tmpl, const CallCommand& call, const FunctionSpec* spec,
                          TemplateEscape escape);

}  // namespace decitool
