#include "decitool/http.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <thread>

#include "decitool/error.hpp"

namespace decitool {

std::chrono::milliseconds RetryPolicy::backoff(int retry) const {
    double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry - 1);
    ms = std::min(ms, static_cast<double>(max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::string Url::origin() const { return scheme + "://" + host + ":" + std::to_string(port); }

Url parse_url(std::string_view url) {
    Url out;
    const auto sep = url.find("://");
    if (sep == std::string_view::npos) throw ConfigError("not an absolute URL: '" + std::string(url) + "'");
    out.scheme = std::string(url.substr(0, sep));
    std::transform(out.scheme.begin(), out.scheme.end(), out.scheme.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (out.scheme != "http" && out.scheme != "https") {
        throw ConfigError("unsupported URL scheme '" + out.scheme + "'");
    }
    std::string_view rest = url.substr(sep + 3);
    const auto slash = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, slash);
    out.target = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    if (!out.target.empty() && out.target.front() == '?') out.target.insert(out.target.begin(), '/');
    out.port = out.scheme == "https" ? 443 : 80;
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        std::string_view port = authority.substr(colon + 1);
        int value = 0;
        auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
        if (ec != std::errc() || ptr != port.data() + port.size() || value <= 0 || value > 65535) {
            throw ConfigError("bad port in URL '" + std::string(url) + "'");
        }
        out.port = value;
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw ConfigError("missing host in URL '" + std::string(url) + "'");
    out.host = std::string(authority);
    return out;
}

std::string percent_encode(std::string_view raw) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(c);
        } else {
            out.push_back('%');
            out.push_back(hex[u >> 4]);
            out.push_back(hex[u & 0xF]);
        }
    }
    return out;
}

std::optional<double> parse_retry_after(std::string_view value) {
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    while (!value.empty() && value.back() == ' ') value.remove_suffix(1);
    double seconds = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seconds);
    if (ec != std::errc() || ptr != value.data() + value.size() || seconds < 0.0 || !std::isfinite(seconds)) {
        return std::nullopt;
    }
    return seconds;
}

namespace {

std::string excerpt(const std::string& body) {
    constexpr std::size_t kMax = 512;
    return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

struct Attempt {
    std::optional<HttpResponse> response;
    httplib::Error error = httplib::Error::Success;
    std::chrono::milliseconds elapsed{0};
};

Attempt attempt_once(const Url& url, const HttpRequest& request, const HttpOptions& options) {
    httplib::Client client(url.origin());
    client.set_connection_timeout(options.connect_timeout);
    client.set_read_timeout(options.read_timeout);
    client.set_write_timeout(options.read_timeout);
    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);

    const auto start = std::chrono::steady_clock::now();
    httplib::Result result = request.method == "POST"
                                 ? client.Post(url.target, headers, request.body, request.content_type)
                                 : client.Get(url.target, headers);
    Attempt a;
    a.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    if (!result) {
        a.error = result.error();
        return a;
    }
    HttpResponse resp;
    resp.status = result->status;
    resp.body = result->body;
    for (const auto& [k, v] : result->headers) resp.headers[k] = v;
    resp.latency = a.elapsed;
    a.response = std::move(resp);
    return a;
}

}  // namespace

HttpResponse send_with_retries(const HttpRequest& request, const HttpOptions& options, HttpTelemetry* telemetry) {
    const Url url = parse_url(request.url);
    auto sleep = options.sleeper ? options.sleeper
                                 : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    const int max_attempts = std::max(0, options.retry.max_retries) + 1;
    for (int attempt = 1;; ++attempt) {
        if (telemetry) ++telemetry->requests;
        Attempt a = attempt_once(url, request, options);
        const bool last = attempt >= max_attempts;
        std::chrono::milliseconds delay = options.retry.backoff(attempt);

        if (a.response) {
            HttpResponse& resp = *a.response;
            resp.attempts = attempt;
            if (resp.status >= 200 && resp.status < 300) return std::move(resp);
            if (!retryable_status(resp.status) || last) {
                if (telemetry) ++telemetry->failures;
                if (resp.status == 429) {
                    std::optional<double> ra;
                    if (auto it = resp.headers.find("Retry-After"); it != resp.headers.end()) {
                        ra = parse_retry_after(it->second);
                    }
                    throw RateLimited(ra, excerpt(resp.body));
                }
                throw HttpError(resp.status, excerpt(resp.body),
                                "HTTP " + std::to_string(resp.status) + " from " + url.host + " after " +
                                    std::to_string(attempt) + " attempt(s)");
            }
            if (auto it = resp.headers.find("Retry-After"); it != resp.headers.end()) {
                if (auto ra = parse_retry_after(it->second)) {
                    auto hinted = std::chrono::milliseconds(static_cast<long long>(*ra * 1000.0));
                    delay = std::min(std::max(delay, hinted), options.retry.max_backoff);
                }
            }
        } else if (last) {
            if (telemetry) ++telemetry->failures;
            const bool timed_out = a.error == httplib::Error::ConnectionTimeout ||
                                   (a.error == httplib::Error::Read && a.elapsed >= options.read_timeout);
            const std::string what = httplib::to_string(a.error);
            if (timed_out) {
                throw Timeout("request to " + url.host + " timed out after " + std::to_string(attempt) +
                              " attempt(s): " + what);
            }
            throw HttpError(0, "", "request to " + url.origin() + " failed after " + std::to_string(attempt) +
                                       " attempt(s): " + what);
        }
        if (telemetry) ++telemetry->retries;
        sleep(delay);
    }
}

}  // namespace decitool
