#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/clustering.hpp"
#include "decitool/registry.hpp"
#include "decitool/rng.hpp"

namespace decitool {

enum class Strategy { Random, InterClass, IntraClass, Mixture, Retrieval };

std::string_view to_string(Strategy s);
/// Accepts "random", "inter-class", "intra-class", "mixture", "retrieval"
/// (underscores and "inter"/"intra" shorthands too). Throws ConfigError.
Strategy strategy_from_string(std::string_view text);

struct SamplerConfig {
    std::size_t k = 5;
    Strategy mode = Strategy::Mixture;
    /// Random : IntraClass : InterClass.
    std::array<unsigned, 3> mixture_weights{2, 1, 2};
    std::uint64_t seed = 0;

    /// Throws ConfigError on k == 0, all-zero weights, or a non-sampling mode.
    void validate() const;
};

struct CandidateToolset {
    std::vector<Tool> tools;
    bool contains_gold = false;
    Strategy strategy_used = Strategy::Random;
    /// Intra-class draw topped up from neighbouring clusters.
    bool fallback = false;

    std::vector<std::string> names() const;
    bool contains(std::string_view name) const;
};

/// What the draw is built around. `name` empty means no gold tool.
struct GoldSpec {
    std::string name;
    bool include = false;

    static GoldSpec none() { return {}; }
    static GoldSpec included(std::string n) { return {std::move(n), true}; }
    static GoldSpec excluded(std::string n) { return {std::move(n), false}; }
};

/// k tools uniformly from the pool. Throws PoolTooSmall, GoldNotInPool.
CandidateToolset sample_random(const ToolPool& pool, const SamplerConfig& cfg, const GoldSpec& gold, Rng& rng);

/// One tool from each of k distinct clusters; when the gold tool is included
/// it represents its own cluster. Only pool members are eligible, so a model
/// fitted on a larger pool can serve a sub-pool. Throws TooFewClusters,
/// GoldNotInPool, PoolTooSmall.
CandidateToolset sample_inter_class(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                    const GoldSpec& gold, Rng& rng);

/// k tools from the gold tool's cluster. A short cluster is topped up from
/// the nearest clusters by centroid distance and the result is flagged as a
/// fallback. Throws InvalidArgument (no gold), GoldNotInPool, PoolTooSmall.
CandidateToolset sample_intra_class(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                    const GoldSpec& gold, Rng& rng);

/// Picks Random / IntraClass / InterClass in proportion to the mixture
/// weights, then delegates. strategy_used records the pick.
CandidateToolset sample_mixture(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                const GoldSpec& gold, Rng& rng);

/// Dispatches on cfg.mode.
CandidateToolset sample_candidates(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                   const GoldSpec& gold, Rng& rng);

/// Generator for draw `index` of a run seeded with `seed`.
Rng draw_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace decitool
