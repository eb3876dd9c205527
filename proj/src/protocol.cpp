#include "decitool/protocol.hpp"

#include "decitool/error.hpp"
#include "decitool/io.hpp"

namespace decitool {

namespace {

std::string_view trim_left(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\n' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    return s;
}

std::string_view trim(std::string_view s) {
    s = trim_left(s);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\n' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

}  // namespace

SearchDecision parse_decision_search(std::string_view text) {
    std::string_view s = trim_left(text);
    if (starts_with(s, kSearchTag)) return {true, {}};
    if (starts_with(s, kAnswerTag)) return {false, std::string(trim(s.substr(kAnswerTag.size())))};
    throw ProtocolViolation("expected [ANSWER] or [SEARCH]", std::string(text));
}

CallDecision parse_decision_call(std::string_view text) {
    std::string_view s = trim_left(text);
    const std::size_t offset = text.size() - s.size();
    if (starts_with(s, kNoCallTag)) return {false, {}};
    if (starts_with(s, kCallTag)) {
        PrefixParse parsed = parse_call_prefix(text, offset + kCallTag.size());
        return {true, std::move(parsed.command)};
    }
    throw ProtocolViolation("expected [CALL] or [NOCALL]", std::string(text));
}

std::string format_answer(std::string_view answer) {
    if (answer.empty()) return std::string(kAnswerTag);
    return std::string(kAnswerTag) + " " + std::string(answer);
}
std::string format_search() { return std::string(kSearchTag); }
std::string format_nocall() { return std::string(kNoCallTag); }
std::string format_call(const CallCommand& call) { return std::string(kCallTag) + " " + to_string(call); }

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.search_system =
        "You are a helpful assistant that can use external tools.\n"
        "First decide whether the user's query needs a tool.\n"
        "If you can answer it yourself, reply with [ANSWER] followed by your answer.\n"
        "If a tool is needed, reply with exactly [SEARCH].";
    t.call_prompt =
        "Candidate tools:\n"
        "{{tools}}\n"
        "Query: {{query}}\n"
        "Is there a suitable tool for this query?\n"
        "If there is, reply with [CALL] followed by one call command, e.g. "
        "[CALL] api_name(param=\"value\", count=3, flag=true).\n"
        "If none of the candidate tools fits, reply with exactly [NOCALL].";
    t.tool_entry = "- {{tool_name}}: {{tool_description}}\n  signature: {{function_signature}}";
    t.tool_entry_brief = "- {{tool_name}}: {{tool_description}}";
    t.api_result =
        "API response from {{api_name}}:\n"
        "{{response}}\n"
        "Using this response, answer the query: {{query}}";
    t.api_result_more =
        "API response from {{api_name}}:\n"
        "{{response}}\n"
        "If another call is needed, reply with [CALL] and the command. "
        "Otherwise answer the query directly: {{query}}";
    t.nocall = "None of the candidate tools can help. Answer the query yourself: {{query}}{{context}}";
    t.corrective_search =
        "Your reply did not follow the protocol ({{error}}). "
        "Reply with [ANSWER] followed by your answer, or with exactly [SEARCH].";
    t.corrective_call =
        "Your reply did not follow the protocol ({{error}}). "
        "Reply with [CALL] name(arg=value, ...) using one of the candidate tools, or with exactly [NOCALL].";
    t.generation =
        "Tool name: {{tool_name}}\n"
        "Description: {{tool_description}}\n"
        "Signature: {{function_signature}}\n"
        "Write {{n_pairs}} diverse, realistic user queries that this tool can answer, each paired with the call "
        "that answers it.\n"
        "Return only a JSON array of objects of the form "
        "{\"query\": \"...\", \"call\": {\"api_name\": \"{{api_name}}\", \"args\": {...}}}.";
    t.checking =
        "Tool name: {{tool_name}}\n"
        "Description: {{tool_description}}\n"
        "Signature: {{function_signature}}\n"
        "For each numbered query-call pair below, decide whether the call is a reasonable way to answer the "
        "query.\n"
        "{{pairs}}\n"
        "Return only a JSON array of {{count}} booleans, in order.";
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    if (!std::filesystem::is_directory(dir)) throw IoError("templates directory '" + dir.string() + "' not found");
    auto maybe = [&](const char* name, std::string& field) {
        const auto p = dir / (std::string(name) + ".txt");
        if (std::filesystem::exists(p)) {
            field = read_text_file(p);
            while (!field.empty() && field.back() == '\n') field.pop_back();
        }
    };
    maybe("search_system", t.search_system);
    maybe("call_prompt", t.call_prompt);
    maybe("tool_entry", t.tool_entry);
    maybe("tool_entry_brief", t.tool_entry_brief);
    maybe("api_result", t.api_result);
    maybe("api_result_more", t.api_result_more);
    maybe("nocall", t.nocall);
    maybe("corrective_search", t.corrective_search);
    maybe("corrective_call", t.corrective_call);
    maybe("generation", t.generation);
    maybe("checking", t.checking);
    return t;
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl.compare(i, 2, "{{") == 0) {
            const auto close = tmpl.find("}}", i + 2);
            if (close != std::string_view::npos) {
                auto it = vars.find(std::string(tmpl.substr(i + 2, close - i - 2)));
                if (it != vars.end()) {
                    out += it->second;
                    i = close + 2;
                    continue;
                }
            }
        }
        out.push_back(tmpl[i++]);
    }
    return out;
}

std::string render_tools(const PromptTemplates& t, std::span<const Tool> tools, bool include_signatures) {
    if (tools.empty()) return "(no tools available)";
    std::string out;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        if (i) out.push_back('\n');
        const Tool& tool = tools[i];
        out += render(include_signatures ? t.tool_entry : t.tool_entry_brief,
                      {{"tool_name", tool.name},
                       {"tool_description", tool.description},
                       {"function_signature", tool.function.signature()}});
    }
    return out;
}

std::vector<Message> search_messages(const PromptTemplates& t, std::string_view query) {
    return {{Role::System, t.search_system}, {Role::User, std::string(query)}};
}

Message call_message(const PromptTemplates& t, std::string_view query, std::span<const Tool> tools,
                     bool include_signatures) {
    return {Role::User,
            render(t.call_prompt, {{"tools", render_tools(t, tools, include_signatures)}, {"query", std::string(query)}})};
}

Message api_result_message(const PromptTemplates& t, std::string_view query, const CallCommand& call,
                           std::string_view response, bool more_rounds) {
    return {Role::User, render(more_rounds ? t.api_result_more : t.api_result,
                               {{"api_name", call.api_name},
                                {"response", std::string(response)},
                                {"query", std::string(query)}})};
}

Message nocall_message(const PromptTemplates& t, std::string_view query, const std::optional<std::string>& context) {
    std::string ctx = context ? "\nRelevant context:\n" + *context : std::string();
    return {Role::User, render(t.nocall, {{"query", std::string(query)}, {"context", ctx}})};
}

}  // namespace decitool
