#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace decitool {

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{8000};

    /// Delay before retry number `retry` (1-based), without Retry-After.
    std::chrono::milliseconds backoff(int retry) const;
};

struct HttpOptions {
    std::chrono::milliseconds connect_timeout{5000};
    std::chrono::milliseconds read_timeout{60000};
    RetryPolicy retry;
    /// Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleeper;
};

/// Counters shared by every request a client makes.
struct HttpTelemetry {
    std::atomic<long> requests{0};
    std::atomic<long> retries{0};
    std::atomic<long> failures{0};
};

struct Url {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string target;  // path plus query, always starts with '/'

    std::string origin() const;
};

/// Throws ConfigError for anything that is not an absolute http(s) URL.
Url parse_url(std::string_view url);

/// RFC 3986 unreserved-set percent encoding.
std::string percent_encode(std::string_view raw);

struct HttpRequest {
    std::string method = "GET";  // GET or POST
    std::string url;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;
    std::chrono::milliseconds latency{0};
    int attempts = 0;
};

/// Sends a request, retrying transport failures, 429 and 5xx with exponential
/// backoff (Retry-After honoured up to max_backoff). Returns 2xx responses.
/// Throws Timeout, BackendError (connection), RateLimited or HttpError once
/// the retry budget is spent; other 4xx statuses throw HttpError immediately.
HttpResponse send_with_retries(const HttpRequest& request, const HttpOptions& options,
                               HttpTelemetry* telemetry = nullptr);

/// Retry-After header value in seconds; HTTP-date forms are ignored.
std::optional<double> parse_retry_after(std::string_view value);

}  // namespace decitool
