#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/backends.hpp"
#include "decitool/call.hpp"
#include "decitool/registry.hpp"

namespace decitool {

inline constexpr std::string_view kAnswerTag = "[ANSWER]";
inline constexpr std::string_view kSearchTag = "[SEARCH]";
inline constexpr std::string_view kNoCallTag = "[NOCALL]";
inline constexpr std::string_view kCallTag = "[CALL]";

struct SearchDecision {
    bool search = false;
    std::string answer;  // content after [ANSWER], trimmed
};

struct CallDecision {
    bool call = false;
    CallCommand command;
};

/// `[SEARCH]` -> search; `[ANSWER] text` -> answer. Tags are case-sensitive
/// and must come first after leading whitespace. Throws ProtocolViolation.
SearchDecision parse_decision_search(std::string_view text);

/// `[NOCALL]` -> no call; `[CALL] name(...)` -> call. Text after the closing
/// parenthesis is ignored. Throws ProtocolViolation or CallSyntaxError
/// (offsets relative to `text`).
CallDecision parse_decision_call(std::string_view text);

std::string format_answer(std::string_view answer);
std::string format_search();
std::string format_nocall();
std::string format_call(const CallCommand& call);

/// Prompt texts. Each field can be overridden by `<field>.txt` in a
/// templates directory. Placeholders use `{{name}}`.
struct PromptTemplates {
    std::string search_system;
    std::string call_prompt;        // {{query}}, {{tools}}
    std::string tool_entry;         // {{tool_name}}, {{tool_description}}, {{function_signature}}
    std::string tool_entry_brief;   // {{tool_name}}, {{tool_description}}
    std::string api_result;         // {{api_name}}, {{response}}, {{query}}
    std::string api_result_more;    // same, when another call round is allowed
    std::string nocall;             // {{query}}, {{context}}
    std::string corrective_search;  // {{error}}
    std::string corrective_call;    // {{error}}
    std::string generation;         // {{tool_name}}, {{tool_description}}, {{function_signature}}, {{api_name}}, {{n_pairs}}
    std::string checking;           // {{tool_name}}, {{tool_description}}, {{function_signature}}, {{pairs}}, {{count}}

    static PromptTemplates defaults();
    /// Defaults overridden by whichever files exist in `dir`.
    static PromptTemplates load(const std::filesystem::path& dir);
};

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars);

std::string render_tools(const PromptTemplates& t, std::span<const Tool> tools, bool include_signatures);

std::vector<Message> search_messages(const PromptTemplates& t, std::string_view query);
Message call_message(const PromptTemplates& t, std::string_view query, std::span<const Tool> tools,
                     bool include_signatures);
Message api_result_message(const PromptTemplates& t, std::string_view query, const CallCommand& call,
                           std::string_view response, bool more_rounds);
Message nocall_message(const PromptTemplates& t, std::string_view query, const std::optional<std::string>& context);

}  // namespace decitool
