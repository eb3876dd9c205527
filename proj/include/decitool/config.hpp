#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/backends.hpp"
#include "decitool/embedding.hpp"
#include "decitool/eval.hpp"
#include "decitool/sampling.hpp"

namespace decitool {

/// Where a chat model comes from: a script file or a remote endpoint.
struct BackendSettings {
    std::string kind;  // "scripted" or "remote"; empty when unset
    std::filesystem::path script;
    std::string endpoint;
    std::string model;
    std::optional<double> temperature;
    double timeout_s = 60.0;
    int max_retries = 3;
    bool system_prompt = true;
};

struct Config {
    std::filesystem::path base_dir = ".";

    // paths
    std::filesystem::path pool, pool_train, pool_test, clusters, dataset_dir, pairs, test_pairs, nosearch_queries,
        executor_registry, templates_dir, sft, report_dir;

    // embedding
    std::string embedding_provider = "hash";
    std::size_t embedding_dim = 256;
    std::string embedding_endpoint;

    // clustering
    std::size_t m = 30;
    std::size_t max_iter = 200;
    double tol = 1e-6;

    SamplerConfig sampler;

    // dataset
    std::size_t train_tools = 900;
    std::size_t pairs_per_tool = 10;
    double call_proportion = 0.6;
    double nocall_proportion = 0.4;
    double valid_fraction = 0.1;
    std::optional<std::array<std::size_t, 3>> valid_counts;

    BackendSettings model, generator, checker;

    // runtime / eval
    std::size_t trials = 6;
    CorrectnessPolicy policy = CorrectnessPolicy::ToolMatch;
    std::string eval_split = "test";
    bool include_signatures = true;
    int max_reprompts = 2;
    int max_rounds = 1;
    std::size_t byte_limit = 4096;

    std::uint64_t seed = 0;
    std::size_t parallel = 1;

    /// Relative paths are taken from the config file's directory.
    std::filesystem::path resolve(const std::filesystem::path& p) const;

    /// Throws ConfigError on k == 0, trials == 0, m == 0 and similar.
    void validate() const;
};

/// Applies one `section.key = value` assignment. Throws ConfigError on
/// unknown keys or malformed values.
void apply_setting(Config& cfg, std::string_view key, const std::vector<std::string>& values);
void apply_setting(Config& cfg, std::string_view key, std::string_view value);

/// Parses a TOML-style file: `[section]` headers, `key = value` lines,
/// quoted strings, numbers, booleans, arrays and # comments.
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
/// Throws IoError when the file is missing.
Config load_config(const std::filesystem::path& path);

/// Every key accepted by apply_setting, in file order.
std::vector<std::string> config_keys();

/// Builds a backend from its settings; remote backends read MODEL_API_KEY.
std::unique_ptr<ModelBackend> make_backend(const BackendSettings& s, const Config& cfg, std::string_view role);

/// Embedding provider from the [embedding] section; remote reads EMBED_API_KEY.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& cfg);

}  // namespace decitool
