#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/http.hpp"
#include "decitool/json.hpp"
#include "decitool/rng.hpp"

namespace decitool {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view text);

struct Message {
    Role role;
    std::string content;

    bool operator==(const Message&) const = default;
};

/// Chat-completion model. complete() either returns text or throws a typed
/// error; remote implementations bound every call by their timeout.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    virtual std::string name() const = 0;
    virtual bool supports_system_prompt() const { return true; }
    virtual std::string complete(std::span<const Message> messages) = 0;
};

/// Validates the message list, folds system messages into the first user
/// turn for backends without system-prompt support, then calls the backend.
/// Throws InvalidArgument on an empty list.
std::string complete(ModelBackend& backend, std::span<const Message> messages);

/// Pattern-keyed response. Every string in `contains` must occur in the
/// content of the last message; with several responses one is drawn using
/// the backend's seeded generator, weighted when weights are given.
struct ScriptRule {
    std::vector<std::string> contains;
    std::vector<std::string> responses;
    std::vector<double> weights;
};

/// Deterministic test double. Rules are tried in order; when none matches the
/// next sequence entry is returned.
class ScriptedBackend final : public ModelBackend {
public:
    ScriptedBackend(std::vector<std::string> sequence, std::vector<ScriptRule> rules = {},
                    std::uint64_t seed = 0, bool cycle = false, std::string name = "scripted");
    ScriptedBackend(ScriptedBackend&& other) noexcept;

    /// Either a JSON array (sequence) or {"sequence", "rules", "seed", "cycle", "name"}.
    static ScriptedBackend from_json(const Json& j);
    static ScriptedBackend load(const std::filesystem::path& path);

    std::string name() const override { return name_; }
    std::string complete(std::span<const Message> messages) override;

    /// Every response returned so far, in order.
    std::vector<std::string> consumed() const;
    std::size_t calls() const;

private:
    std::string name_;
    std::vector<std::string> sequence_;
    std::vector<ScriptRule> rules_;
    bool cycle_;
    mutable std::mutex mutex_;
    Rng rng_;
    std::size_t next_ = 0;
    std::vector<std::string> log_;
};

struct RemoteChatConfig {
    std::string endpoint;  // full URL of the chat-completions endpoint
    std::string model;
    std::string api_key;
    std::optional<double> temperature;
    bool system_prompt = true;
    HttpOptions http;
};

/// POST {"model", "messages"} -> {"choices": [{"message": {"content"}}]}.
class RemoteChatBackend final : public ModelBackend {
public:
    explicit RemoteChatBackend(RemoteChatConfig config);

    std::string name() const override { return "remote:" + config_.model; }
    bool supports_system_prompt() const override { return config_.system_prompt; }
    std::string complete(std::span<const Message> messages) override;

    const HttpTelemetry& telemetry() const { return telemetry_; }

private:
    RemoteChatConfig config_;
    HttpTelemetry telemetry_;
};

}  // namespace decitool
