#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/backends.hpp"
#include "decitool/embedding.hpp"
#include "decitool/executor.hpp"
#include "decitool/protocol.hpp"
#include "decitool/registry.hpp"
#include "decitool/sampling.hpp"

namespace decitool {

/// States of the two-level decision. NoSearch, NoCall and Call are terminal;
/// Search is always intermediate. None marks a trace aborted before the
/// first valid decision.
enum class Branch { None = 0, NoSearch = 1, Search = 2, NoCall = 3, Call = 4 };

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view text);

struct StepRecord {
    std::string stage;  // decision-search, decision-call, answer, synthesis
    std::string raw_output;
    double duration_ms = 0.0;

    bool operator==(const StepRecord& o) const { return stage == o.stage && raw_output == o.raw_output; }
};

struct CallRecord {
    CallCommand call;
    ApiResponse response;
    std::optional<std::string> error;  // upstream failure text, if any

    bool operator==(const CallRecord& o) const {
        return call == o.call && response.status == o.response.status && response.body == o.response.body &&
               error == o.error;
    }
};

struct DecisionTrace {
    std::string id;
    std::string query;
    Branch branch = Branch::None;
    std::vector<Branch> path;
    std::vector<std::string> candidate_tools;
    std::vector<StepRecord> steps;
    std::vector<CallRecord> calls;
    std::string final_answer;
    int reprompts = 0;
    bool aborted = false;
    std::string error;

    bool visited(Branch b) const;
    const CallCommand* parsed_call() const { return calls.empty() ? nullptr : &calls.front().call; }
    const ApiResponse* api_response() const { return calls.empty() ? nullptr : &calls.front().response; }

    /// Equality ignoring step timings.
    bool operator==(const DecisionTrace&) const = default;
};

struct RuntimeConfig {
    std::size_t k = 5;
    int max_reprompts = 2;
    int max_rounds = 1;
    bool include_signatures = true;
    PromptTemplates templates = PromptTemplates::defaults();
    /// Hook for branch ③: returns extra context for the direct answer.
    std::function<std::optional<std::string>(std::string_view query)> nocall_retrieval;
};

/// Top-k tools by cosine similarity between the query and each description,
/// ties broken by name. Throws PoolTooSmall.
CandidateToolset retrieve_candidates(const ToolPool& pool, CachedEmbedder& embedder, std::string_view query,
                                     std::size_t k);
CandidateToolset retrieve_candidates(const ToolPool& pool, const EmbeddingProvider& provider, std::string_view query,
                                     std::size_t k);

/// Runs the decision state machine for one query. When `candidates` is set
/// those tools are shown at Decision-Call; otherwise they are retrieved with
/// `embedder`, which must then be non-null. A protocol violation that
/// survives max_reprompts corrective turns returns an aborted trace whose
/// branch is the last valid state.
DecisionTrace answer_query(std::string_view query, ModelBackend& backend, const ToolPool& pool,
                           CachedEmbedder* embedder, const ApiExecutor& executor, const RuntimeConfig& cfg,
                           const std::optional<std::vector<Tool>>& candidates = std::nullopt);

Json to_json(const DecisionTrace& trace);
DecisionTrace trace_from_json(const Json& j);

}  // namespace decitool
