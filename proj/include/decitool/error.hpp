#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace decitool {

// Broad classes used by the CLI to pick exit codes.
enum class ErrorClass {
    Config,    // configuration, IO, parse and validation errors (exit 2)
    Runtime,   // protocol, backend and evaluation failures (exit 1)
};

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message, ErrorClass cls = ErrorClass::Runtime)
        : std::runtime_error(message), class_(cls) {}

    ErrorClass error_class() const { return class_; }

private:
    ErrorClass class_;
};

#define DECITOOL_ERROR(Name, Class)                                            \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(message, Class) {}   \
    }

DECITOOL_ERROR(IoError, ErrorClass::Config);
DECITOOL_ERROR(ParseError, ErrorClass::Config);
DECITOOL_ERROR(ValidationError, ErrorClass::Config);
DECITOOL_ERROR(ConfigError, ErrorClass::Config);
DECITOOL_ERROR(RangeError, ErrorClass::Config);
DECITOOL_ERROR(InvalidArgument, ErrorClass::Config);

DECITOOL_ERROR(EmptyInput, ErrorClass::Runtime);
DECITOOL_ERROR(DimMismatch, ErrorClass::Runtime);
DECITOOL_ERROR(ZeroVector, ErrorClass::Runtime);
DECITOOL_ERROR(TooFewPoints, ErrorClass::Runtime);
DECITOOL_ERROR(UnknownTool, ErrorClass::Runtime);
DECITOOL_ERROR(PoolTooSmall, ErrorClass::Runtime);
DECITOOL_ERROR(GoldNotInPool, ErrorClass::Runtime);
DECITOOL_ERROR(TooFewClusters, ErrorClass::Runtime);
DECITOOL_ERROR(BackendError, ErrorClass::Runtime);
DECITOOL_ERROR(AllMalformed, ErrorClass::Runtime);
DECITOOL_ERROR(UnknownApi, ErrorClass::Runtime);
DECITOOL_ERROR(IdMismatch, ErrorClass::Runtime);
DECITOOL_ERROR(EmptyReference, ErrorClass::Runtime);

#undef DECITOOL_ERROR

/// Transport-level timeout while talking to a remote service.
class Timeout : public BackendError {
public:
    explicit Timeout(const std::string& message) : BackendError(message) {}
};

/// Non-success HTTP status after retries were exhausted.
class HttpError : public BackendError {
public:
    HttpError(int status, std::string body_excerpt, const std::string& message)
        : BackendError(message), status_(status), body_excerpt_(std::move(body_excerpt)) {}

    int status() const { return status_; }
    const std::string& body_excerpt() const { return body_excerpt_; }

private:
    int status_;
    std::string body_excerpt_;
};

/// HTTP 429 after retries were exhausted. retry_after is in seconds when the
/// server sent a usable Retry-After header.
class RateLimited : public HttpError {
public:
    RateLimited(std::optional<double> retry_after, std::string body_excerpt)
        : HttpError(429, std::move(body_excerpt), "rate limited (HTTP 429)"),
          retry_after_(retry_after) {}

    std::optional<double> retry_after() const { return retry_after_; }

private:
    std::optional<double> retry_after_;
};

/// Embedding provider failure. Carries how many attempts were made.
class ProviderError : public BackendError {
public:
    ProviderError(const std::string& message, int attempts, int last_status)
        : BackendError(message), attempts_(attempts), last_status_(last_status) {}

    int attempts() const { return attempts_; }
    int last_status() const { return last_status_; }

private:
    int attempts_;
    int last_status_;
};

/// The model output did not follow the decision protocol.
class ProtocolViolation : public Error {
public:
    ProtocolViolation(const std::string& message, std::string raw)
        : Error(message, ErrorClass::Runtime), raw_(std::move(raw)) {}

    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

/// Call-command syntax error. position is a byte offset into the parsed text.
class CallSyntaxError : public Error {
public:
    CallSyntaxError(std::size_t position, std::string expected);

    std::size_t position() const { return position_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t position_;
    std::string expected_;
};

class MissingRequiredParam : public Error {
public:
    MissingRequiredParam(std::string api_name, std::string param)
        : Error("missing required parameter '" + param + "' for " + api_name, ErrorClass::Runtime),
          param_(std::move(param)) {}

    const std::string& param() const { return param_; }

private:
    std::string param_;
};

/// Argument failed validation against a FunctionSpec (unknown name or wrong type).
class InvalidCallArgument : public Error {
public:
    explicit InvalidCallArgument(const std::string& message) : Error(message, ErrorClass::Runtime) {}
};

class UpstreamError : public Error {
public:
    UpstreamError(int status, const std::string& message)
        : Error(message, ErrorClass::Runtime), status_(status) {}

    int status() const { return status_; }

private:
    int status_;
};

}  // namespace decitool
