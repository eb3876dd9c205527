#include "decitool/runtime.hpp"

#include <algorithm>
#include <chrono>

#include "decitool/error.hpp"

namespace decitool {

std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::None: return "none";
        case Branch::NoSearch: return "nosearch";
        case Branch::Search: return "search";
        case Branch::NoCall: return "nocall";
        case Branch::Call: return "call";
    }
    return "none";
}

Branch branch_from_string(std::string_view text) {
    if (text == "none") return Branch::None;
    if (text == "nosearch") return Branch::NoSearch;
    if (text == "search") return Branch::Search;
    if (text == "nocall") return Branch::NoCall;
    if (text == "call") return Branch::Call;
    throw ParseError("unknown branch '" + std::string(text) + "'");
}

bool DecisionTrace::visited(Branch b) const { return std::find(path.begin(), path.end(), b) != path.end(); }

CandidateToolset retrieve_candidates(const ToolPool& pool, CachedEmbedder& embedder, std::string_view query,
                                     std::size_t k) {
    if (pool.size() < k) {
        throw PoolTooSmall("pool has " + std::to_string(pool.size()) + " tools, need k = " + std::to_string(k));
    }
    const EmbeddingVector q = embedder.get(query);
    std::vector<std::string> descriptions;
    descriptions.reserve(pool.size());
    for (const auto& t : pool.tools()) descriptions.push_back(t.description);
    const auto vectors = embedder.get_many(descriptions);

    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) scored.emplace_back(cosine(q, vectors[i]), i);
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return pool.tools()[a.second].name < pool.tools()[b.second].name;
    });

    CandidateToolset out;
    out.strategy_used = Strategy::Retrieval;
    for (std::size_t i = 0; i < k; ++i) out.tools.push_back(pool.tools()[scored[i].second]);
    return out;
}

CandidateToolset retrieve_candidates(const ToolPool& pool, const EmbeddingProvider& provider, std::string_view query,
                                     std::size_t k) {
    CachedEmbedder embedder(provider);
    return retrieve_candidates(pool, embedder, query, k);
}

namespace {

std::string strip_answer_tag(std::string_view text) {
    std::size_t b = 0;
    while (b < text.size() && (text[b] == ' ' || text[b] == '\n' || text[b] == '\t' || text[b] == '\r')) ++b;
    std::string_view s = text.substr(b);
    if (s.substr(0, kAnswerTag.size()) == kAnswerTag) {
        s.remove_prefix(kAnswerTag.size());
        while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
    }
    return std::string(s);
}

class Session {
public:
    Session(std::string_view query, ModelBackend& backend, const RuntimeConfig& cfg)
        : backend_(backend), cfg_(cfg) {
        trace_.query = std::string(query);
        messages_ = search_messages(cfg.templates, query);
    }

    DecisionTrace& trace() { return trace_; }
    std::vector<Message>& messages() { return messages_; }

    std::string ask(const char* stage) {
        const auto start = std::chrono::steady_clock::now();
        std::string out = complete(backend_, messages_);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        trace_.steps.push_back({stage, out, ms});
        return out;
    }

    void abort(const std::string& why) {
        trace_.aborted = true;
        trace_.error = why;
    }

    void enter(Branch b) {
        trace_.branch = b;
        trace_.path.push_back(b);
    }

private:
    ModelBackend& backend_;
    const RuntimeConfig& cfg_;
    DecisionTrace trace_;
    std::vector<Message> messages_;
};

const Tool* find_candidate(const std::vector<Tool>& tools, std::string_view api_name) {
    for (const auto& t : tools) {
        if (t.function.api_name == api_name) return &t;
    }
    return nullptr;
}

}  // namespace

DecisionTrace answer_query(std::string_view query, ModelBackend& backend, const ToolPool& pool,
                           CachedEmbedder* embedder, const ApiExecutor& executor, const RuntimeConfig& cfg,
                           const std::optional<std::vector<Tool>>& candidates) {
    Session s(query, backend, cfg);
    const PromptTemplates& tpl = cfg.templates;

    // Decision-Search.
    SearchDecision search;
    for (int attempt = 0;; ++attempt) {
        std::string out = s.ask("decision-search");
        s.messages().push_back({Role::Assistant, out});
        try {
            search = parse_decision_search(out);
            break;
        } catch (const ProtocolViolation& e) {
            if (attempt >= cfg.max_reprompts) {
                s.abort(e.what());
                return std::move(s.trace());
            }
            ++s.trace().reprompts;
            s.messages().push_back({Role::User, render(tpl.corrective_search, {{"error", e.what()}})});
        }
    }
    if (!search.search) {
        s.enter(Branch::NoSearch);
        s.trace().final_answer = search.answer;
        return std::move(s.trace());
    }
    s.enter(Branch::Search);

    // Decision-Call.
    std::vector<Tool> tools;
    if (candidates) {
        tools = *candidates;
    } else {
        if (!embedder) throw ConfigError("answer_query: no candidate tools and no embedder for retrieval");
        tools = retrieve_candidates(pool, *embedder, query, std::min(cfg.k, pool.size())).tools;
    }
    for (const auto& t : tools) s.trace().candidate_tools.push_back(t.name);
    s.messages().push_back(call_message(tpl, query, tools, cfg.include_signatures));

    CallDecision decision;
    for (int attempt = 0;; ++attempt) {
        std::string out = s.ask("decision-call");
        s.messages().push_back({Role::Assistant, out});
        std::string problem;
        try {
            decision = parse_decision_call(out);
            if (decision.call) {
                const Tool* tool = find_candidate(tools, decision.command.api_name);
                if (!tool) throw InvalidCallArgument("API '" + decision.command.api_name + "' is not a candidate tool");
                validate_call(decision.command, tool->function);
            }
            break;
        } catch (const ProtocolViolation& e) {
            problem = e.what();
        } catch (const CallSyntaxError& e) {
            problem = e.what();
        } catch (const MissingRequiredParam& e) {
            problem = e.what();
        } catch (const InvalidCallArgument& e) {
            problem = e.what();
        }
        if (attempt >= cfg.max_reprompts) {
            s.abort(problem);
            return std::move(s.trace());
        }
        ++s.trace().reprompts;
        s.messages().push_back({Role::User, render(tpl.corrective_call, {{"error", problem}})});
    }

    if (!decision.call) {
        s.enter(Branch::NoCall);
        std::optional<std::string> context;
        if (cfg.nocall_retrieval) context = cfg.nocall_retrieval(query);
        s.messages().push_back(nocall_message(tpl, query, context));
        s.trace().final_answer = strip_answer_tag(s.ask("answer"));
        return std::move(s.trace());
    }

    s.enter(Branch::Call);
    CallCommand command = std::move(decision.command);
    const int rounds = std::max(1, cfg.max_rounds);
    for (int round = 1;; ++round) {
        CallRecord record{command, {}, std::nullopt};
        try {
            record.response = executor.execute(command);
        } catch (const UpstreamError& e) {
            record.response.status = e.status();
            record.response.body = e.what();
            record.error = e.what();
        }
        const bool more = round < rounds;
        s.messages().push_back(api_result_message(tpl, query, command, record.response.body, more));
        s.trace().calls.push_back(std::move(record));
        std::string out = s.ask("synthesis");
        s.messages().push_back({Role::Assistant, out});
        if (more) {
            try {
                CallDecision next = parse_decision_call(out);
                if (next.call) {
                    if (const Tool* tool = find_candidate(tools, next.command.api_name)) {
                        validate_call(next.command, tool->function);
                        command = std::move(next.command);
                        continue;
                    }
                }
            } catch (const Error&) {
                // Not another call; treat the reply as the answer.
            }
        }
        s.trace().final_answer = strip_answer_tag(out);
        return std::move(s.trace());
    }
}

Json to_json(const DecisionTrace& trace) {
    Json path = Json::array();
    for (Branch b : trace.path) path.push_back(to_string(b));
    Json steps = Json::array();
    for (const auto& st : trace.steps) {
        steps.push_back({{"stage", st.stage}, {"raw_output", st.raw_output}, {"duration_ms", st.duration_ms}});
    }
    Json calls = Json::array();
    for (const auto& c : trace.calls) {
        calls.push_back({{"call", to_json(c.call)},
                         {"status", c.response.status},
                         {"body", c.response.body},
                         {"truncated", c.response.truncated},
                         {"latency_ms", c.response.latency.count()},
                         {"error", c.error ? Json(*c.error) : Json(nullptr)}});
    }
    const CallCommand* pc = trace.parsed_call();
    const ApiResponse* ar = trace.api_response();
    return Json{{"id", trace.id},
                {"query", trace.query},
                {"branch", to_string(trace.branch)},
                {"path", path},
                {"candidate_tools", trace.candidate_tools},
                {"steps", steps},
                {"parsed_call", pc ? to_json(*pc) : Json(nullptr)},
                {"api_response", ar ? Json{{"status", ar->status}, {"body", ar->body}} : Json(nullptr)},
                {"calls", calls},
                {"final_answer", trace.final_answer},
                {"reprompts", trace.reprompts},
                {"aborted", trace.aborted},
                {"error", trace.error}};
}

DecisionTrace trace_from_json(const Json& j) {
    try {
        DecisionTrace t;
        t.id = j.value("id", std::string());
        t.query = j.at("query").get<std::string>();
        t.branch = branch_from_string(j.at("branch").get<std::string>());
        for (const auto& b : j.at("path")) t.path.push_back(branch_from_string(b.get<std::string>()));
        t.candidate_tools = j.at("candidate_tools").get<std::vector<std::string>>();
        for (const auto& st : j.at("steps")) {
            t.steps.push_back({st.at("stage").get<std::string>(), st.at("raw_output").get<std::string>(),
                               st.value("duration_ms", 0.0)});
        }
        for (const auto& c : j.at("calls")) {
            CallRecord r;
            r.call = call_from_json(c.at("call"));
            r.response.status = c.at("status").get<int>();
            r.response.body = c.at("body").get<std::string>();
            r.response.truncated = c.value("truncated", false);
            r.response.latency = std::chrono::milliseconds(c.value("latency_ms", 0));
            if (c.contains("error") && c["error"].is_string()) r.error = c["error"].get<std::string>();
            t.calls.push_back(std::move(r));
        }
        t.final_answer = j.at("final_answer").get<std::string>();
        t.reprompts = j.value("reprompts", 0);
        t.aborted = j.value("aborted", false);
        t.error = j.value("error", std::string());
        return t;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("trace: ") + e.what());
    }
}

}  // namespace decitool
