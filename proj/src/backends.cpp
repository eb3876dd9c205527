#include "decitool/backends.hpp"

#include "decitool/error.hpp"
#include "decitool/io.hpp"

namespace decitool {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(std::string_view text) {
    if (text == "system") return Role::System;
    if (text == "user") return Role::User;
    if (text == "assistant") return Role::Assistant;
    throw ParseError("unknown message role '" + std::string(text) + "'");
}

std::string complete(ModelBackend& backend, std::span<const Message> messages) {
    if (messages.empty()) throw InvalidArgument("complete: message list is empty");
    if (backend.supports_system_prompt()) return backend.complete(messages);

    std::vector<Message> folded;
    std::string pending;
    for (const auto& m : messages) {
        if (m.role == Role::System) {
            if (!pending.empty()) pending += "\n\n";
            pending += m.content;
            continue;
        }
        Message copy = m;
        if (!pending.empty() && m.role == Role::User) {
            copy.content = pending + "\n\n" + copy.content;
            pending.clear();
        }
        folded.push_back(std::move(copy));
    }
    if (!pending.empty()) folded.push_back({Role::User, pending});
    return backend.complete(folded);
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> sequence, std::vector<ScriptRule> rules,
                                 std::uint64_t seed, bool cycle, std::string name)
    : name_(std::move(name)), sequence_(std::move(sequence)), rules_(std::move(rules)), cycle_(cycle), rng_(seed) {
    for (const auto& r : rules_) {
        if (r.responses.empty()) throw ConfigError("scripted backend: rule without responses");
        if (!r.weights.empty() && r.weights.size() != r.responses.size()) {
            throw ConfigError("scripted backend: rule weights and responses differ in length");
        }
    }
}

ScriptedBackend::ScriptedBackend(ScriptedBackend&& other) noexcept
    : name_(std::move(other.name_)),
      sequence_(std::move(other.sequence_)),
      rules_(std::move(other.rules_)),
      cycle_(other.cycle_),
      rng_(other.rng_),
      next_(other.next_),
      log_(std::move(other.log_)) {}

ScriptedBackend ScriptedBackend::from_json(const Json& j) {
    if (j.is_array()) return ScriptedBackend(j.get<std::vector<std::string>>());
    if (!j.is_object()) throw ConfigError("scripted backend: script must be an array or an object");
    try {
        std::vector<std::string> sequence = j.value("sequence", std::vector<std::string>{});
        std::vector<ScriptRule> rules;
        for (const auto& rj : j.value("rules", Json::array())) {
            ScriptRule r;
            if (rj.contains("contains")) {
                if (rj["contains"].is_string()) {
                    r.contains.push_back(rj["contains"].get<std::string>());
                } else {
                    r.contains = rj["contains"].get<std::vector<std::string>>();
                }
            }
            if (rj.contains("response")) r.responses.push_back(rj["response"].get<std::string>());
            if (rj.contains("responses")) {
                for (const auto& s : rj["responses"]) r.responses.push_back(s.get<std::string>());
            }
            r.weights = rj.value("weights", std::vector<double>{});
            rules.push_back(std::move(r));
        }
        return ScriptedBackend(std::move(sequence), std::move(rules), j.value("seed", std::uint64_t{0}),
                               j.value("cycle", false), j.value("name", std::string("scripted")));
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("scripted backend: ") + e.what());
    }
}

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
    return from_json(parse_json(read_text_file(path), path.string()));
}

std::string ScriptedBackend::complete(std::span<const Message> messages) {
    if (messages.empty()) throw InvalidArgument("complete: message list is empty");
    const std::string& last = messages.back().content;
    std::lock_guard lock(mutex_);
    for (const auto& rule : rules_) {
        bool match = true;
        for (const auto& needle : rule.contains) {
            if (last.find(needle) == std::string::npos) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        std::size_t pick = 0;
        if (rule.responses.size() > 1) {
            if (rule.weights.empty()) {
                pick = rng_.uniform_index(rule.responses.size());
            } else {
                pick = rng_.weighted_index(rule.weights);
            }
        }
        log_.push_back(rule.responses[pick]);
        return log_.back();
    }
    if (next_ >= sequence_.size()) {
        if (!cycle_ || sequence_.empty()) throw BackendError("scripted backend '" + name_ + "': script exhausted");
        next_ = 0;
    }
    log_.push_back(sequence_[next_++]);
    return log_.back();
}

std::vector<std::string> ScriptedBackend::consumed() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config) : config_(std::move(config)) {
    parse_url(config_.endpoint);
}

std::string RemoteChatBackend::complete(std::span<const Message> messages) {
    if (messages.empty()) throw InvalidArgument("complete: message list is empty");
    Json msgs = Json::array();
    for (const auto& m : messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    Json body{{"model", config_.model}, {"messages", std::move(msgs)}};
    if (config_.temperature) body["temperature"] = *config_.temperature;

    HttpRequest req;
    req.method = "POST";
    req.url = config_.endpoint;
    req.body = body.dump();
    if (!config_.api_key.empty()) req.headers["Authorization"] = "Bearer " + config_.api_key;

    HttpResponse resp = send_with_retries(req, config_.http, &telemetry_);
    Json parsed;
    try {
        parsed = Json::parse(resp.body);
        const Json& content = parsed.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw BackendError("chat response content is not a string");
        return content.get<std::string>();
    } catch (const Json::exception& e) {
        throw BackendError(std::string("malformed chat response: ") + e.what());
    }
}

}  // namespace decitool
