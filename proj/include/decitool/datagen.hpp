#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decitool/backends.hpp"
#include "decitool/call.hpp"
#include "decitool/clustering.hpp"
#include "decitool/protocol.hpp"
#include "decitool/registry.hpp"
#include "decitool/sampling.hpp"

namespace decitool {

struct QueryCallPair {
    std::string tool_name;
    std::string query;
    CallCommand call;

    bool operator==(const QueryCallPair&) const = default;
};

/// Pairs keyed by tool name; iteration follows the pool order, not the map.
using PairsByTool = std::map<std::string, std::vector<QueryCallPair>>;

struct GenerationResult {
    std::vector<QueryCallPair> pairs;
    std::size_t malformed = 0;
};

/// Asks the generator for `n_pairs` query-call pairs for one tool and keeps
/// the well-formed ones (at most n_pairs). An entry is malformed when it is
/// not an object with a non-empty query, or its call does not validate
/// against the tool's signature. Throws BackendError, AllMalformed.
GenerationResult generate_pairs(const Tool& tool, ModelBackend& generator, std::size_t n_pairs,
                                const PromptTemplates& templates = PromptTemplates::defaults());

/// Keeps the pairs the checker marks reasonable, preserving order. One
/// checker request per run of consecutive pairs for the same tool; the reply
/// must be a JSON array of booleans of matching length. Throws BackendError.
std::vector<QueryCallPair> check_pairs(std::span<const QueryCallPair> pairs, ModelBackend& checker,
                                       const ToolPool& pool,
                                       const PromptTemplates& templates = PromptTemplates::defaults());

struct GenerationReport {
    PairsByTool pairs;
    std::size_t generated = 0;
    std::size_t malformed = 0;
    std::size_t rejected = 0;
    std::vector<std::string> failed_tools;  // every entry malformed
};

/// generate_pairs + check_pairs over a whole pool. Tools run concurrently up
/// to `parallel`; the result does not depend on scheduling unless a backend
/// draws randomly.
GenerationReport run_generation(const ToolPool& pool, ModelBackend& generator, ModelBackend& checker,
                                std::size_t n_pairs, const PromptTemplates& templates, std::size_t parallel = 1);

enum class SampleKind { NoSearch, NoCall, Call };

std::string_view to_string(SampleKind kind);
SampleKind sample_kind_from_string(std::string_view text);

struct SampleMetadata {
    std::string strategy = "none";
    std::uint64_t seed = 0;  // seed of this sample's candidate draw
    bool fallback = false;
    std::optional<std::size_t> cluster;

    bool operator==(const SampleMetadata&) const = default;
};

struct Sample {
    std::string id;
    SampleKind kind = SampleKind::NoSearch;
    std::string query;
    std::vector<std::string> candidate_tools;
    /// Present for Call; for NoCall it records the tool the query was written
    /// for (kept out of candidate_tools); absent for NoSearch.
    std::optional<CallCommand> gold_call;
    SampleMetadata metadata;

    bool operator==(const Sample&) const = default;
};

/// Throws ValidationError when the kind invariants do not hold. With a pool,
/// NoCall samples are also checked for the gold tool's absence by name.
void validate_sample(const Sample& sample, const ToolPool* pool = nullptr);

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> valid;
    std::vector<Sample> test;

    bool operator==(const DatasetSplit&) const = default;
};

struct Proportions {
    double call = 0.6;
    double nocall = 0.4;
};

struct AssemblyOptions {
    SamplerConfig sampler;
    Proportions proportions;
    std::uint64_t seed = 0;
    double valid_fraction = 0.1;
    /// Exact validation sizes per kind (NoSearch, NoCall, Call); overrides
    /// valid_fraction when set.
    std::optional<std::array<std::size_t, 3>> valid_counts;
};

/// Call/NoCall samples for every pair in `pairs`, in a seeded order. The
/// first floor(call * n) pairs of that order become Call samples.
std::vector<Sample> make_search_samples(const ToolPool& pool, const ClusterModel& clusters, const PairsByTool& pairs,
                                        const SamplerConfig& sampler, const Proportions& proportions,
                                        std::uint64_t seed, std::string_view id_prefix);

/// Builds train/valid from the training pool plus NoSearch queries, and the
/// test split from held-out tools when given. Throws InvalidArgument on bad
/// proportions or no NoSearch queries; sampler errors propagate.
DatasetSplit assemble_dataset(const ToolPool& pool_train, const ClusterModel& clusters, const PairsByTool& train_pairs,
                              const std::vector<std::string>& nosearch_queries, const AssemblyOptions& options,
                              const ToolPool* pool_test = nullptr, const PairsByTool* test_pairs = nullptr);

struct KindCounts {
    std::size_t nosearch = 0;
    std::size_t nocall = 0;
    std::size_t call = 0;

    std::size_t total() const { return nosearch + nocall + call; }
};

struct DatasetStats {
    KindCounts train, valid, test;
};

DatasetStats compute_stats(const DatasetSplit& split);
/// Fixed layout: header, then Train/Valid/Test rows; zero counts print "-".
std::string format_stats(const DatasetStats& stats);

Json to_json(const Sample& sample);
Sample sample_from_json(const Json& j);
Json to_json(const QueryCallPair& pair);
QueryCallPair pair_from_json(const Json& j);

/// train.jsonl, valid.jsonl, test.jsonl under `dir`.
void write_dataset(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit read_dataset(const std::filesystem::path& dir);
std::vector<Sample> read_samples(const std::filesystem::path& path);

void write_pairs(const ToolPool& pool, const PairsByTool& pairs, const std::filesystem::path& path);
PairsByTool read_pairs(const std::filesystem::path& path);

/// One query per line of a text file, or a JSONL file whose records carry a
/// "query" (or "instruction") field. Blank lines are skipped.
std::vector<std::string> read_queries(const std::filesystem::path& path);

/// Chat turns that teach the decision protocol for one sample. `pool` must
/// contain every candidate tool.
std::vector<Message> sft_messages(const Sample& sample, const ToolPool& pool, const PromptTemplates& templates,
                                  bool include_signatures = true);

/// JSONL of {"messages": [...], "meta": {"split", "sample"}}. The meta block
/// lets import_sft rebuild the split exactly.
void export_sft(const DatasetSplit& split, const ToolPool& pool, const PromptTemplates& templates,
                const std::filesystem::path& path, bool include_signatures = true);
/// Throws ParseError when a record's messages disagree with its sample.
DatasetSplit import_sft(const std::filesystem::path& path);

}  // namespace decitool
