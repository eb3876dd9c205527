#include "decitool/sampling.hpp"

#include <algorithm>

#include "decitool/error.hpp"

namespace decitool {

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::InterClass: return "inter-class";
        case Strategy::IntraClass: return "intra-class";
        case Strategy::Mixture: return "mixture";
        case Strategy::Retrieval: return "retrieval";
    }
    return "random";
}

Strategy strategy_from_string(std::string_view text) {
    std::string t(text);
    std::replace(t.begin(), t.end(), '_', '-');
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t == "random") return Strategy::Random;
    if (t == "inter-class" || t == "inter" || t == "interclass") return Strategy::InterClass;
    if (t == "intra-class" || t == "intra" || t == "intraclass") return Strategy::IntraClass;
    if (t == "mixture" || t == "mix") return Strategy::Mixture;
    if (t == "retrieval") return Strategy::Retrieval;
    throw ConfigError("unknown sampling strategy '" + std::string(text) + "'");
}

void SamplerConfig::validate() const {
    if (k == 0) throw ConfigError("sampler: k must be at least 1");
    if (mixture_weights[0] + mixture_weights[1] + mixture_weights[2] == 0) {
        throw ConfigError("sampler: mixture weights must not all be zero");
    }
    if (mode == Strategy::Retrieval) throw ConfigError("sampler: retrieval is not a training-time strategy");
}

std::vector<std::string> CandidateToolset::names() const {
    std::vector<std::string> out;
    out.reserve(tools.size());
    for (const auto& t : tools) out.push_back(t.name);
    return out;
}

bool CandidateToolset::contains(std::string_view name) const {
    return std::any_of(tools.begin(), tools.end(), [&](const Tool& t) { return t.name == name; });
}

Rng draw_rng(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

namespace {

void check_gold(const ToolPool& pool, const GoldSpec& gold) {
    if (gold.include && gold.name.empty()) throw InvalidArgument("sampler: include_gold set without a gold tool");
    if (gold.include && !pool.contains(gold.name)) {
        throw GoldNotInPool("gold tool '" + gold.name + "' is not in the pool");
    }
}

CandidateToolset finish(const ToolPool& pool, std::vector<std::size_t> picks, const GoldSpec& gold, Strategy used,
                        bool fallback, Rng& rng) {
    rng.shuffle(picks);
    CandidateToolset out;
    out.strategy_used = used;
    out.fallback = fallback;
    out.tools.reserve(picks.size());
    for (std::size_t i : picks) out.tools.push_back(pool.tools()[i]);
    out.contains_gold = !gold.name.empty() && out.contains(gold.name);
    return out;
}

// Pool indices of the cluster's members that are in the pool and are not the gold tool.
std::vector<std::size_t> eligible_members(const ToolPool& pool, const ClusterModel& clusters, std::size_t c,
                                          std::string_view gold) {
    std::vector<std::size_t> out;
    for (const auto& name : clusters.members(c)) {
        if (name == gold) continue;
        if (auto idx = pool.index_of(name)) out.push_back(*idx);
    }
    return out;
}

}  // namespace

CandidateToolset sample_random(const ToolPool& pool, const SamplerConfig& cfg, const GoldSpec& gold, Rng& rng) {
    check_gold(pool, gold);
    const std::size_t k = cfg.k;
    if (pool.size() < k) {
        throw PoolTooSmall("pool has " + std::to_string(pool.size()) + " tools, need k = " + std::to_string(k));
    }
    std::vector<std::size_t> others;
    others.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool.tools()[i].name != gold.name) others.push_back(i);
    }
    const std::size_t need = gold.include ? k - 1 : k;
    if (others.size() < need) {
        throw PoolTooSmall("pool has " + std::to_string(others.size()) + " non-gold tools, need " +
                           std::to_string(need));
    }
    std::vector<std::size_t> picks;
    picks.reserve(k);
    if (gold.include) picks.push_back(*pool.index_of(gold.name));
    for (std::size_t j : rng.choose(others.size(), need)) picks.push_back(others[j]);
    return finish(pool, std::move(picks), gold, Strategy::Random, false, rng);
}

CandidateToolset sample_inter_class(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                    const GoldSpec& gold, Rng& rng) {
    check_gold(pool, gold);
    const std::size_t k = cfg.k;
    if (clusters.m() < k) {
        throw TooFewClusters("inter-class sampling needs at least k = " + std::to_string(k) + " clusters, have " +
                             std::to_string(clusters.m()));
    }
    std::optional<std::size_t> gold_cluster;
    if (gold.include) gold_cluster = clusters.cluster_of(gold.name);

    std::vector<std::size_t> candidates;  // clusters with at least one eligible member
    std::vector<std::vector<std::size_t>> members(clusters.m());
    for (std::size_t c = 0; c < clusters.m(); ++c) {
        if (gold_cluster && c == *gold_cluster) continue;
        members[c] = eligible_members(pool, clusters, c, gold.name);
        if (!members[c].empty()) candidates.push_back(c);
    }
    const std::size_t need = gold.include ? k - 1 : k;
    if (candidates.size() < need) {
        throw TooFewClusters("inter-class sampling needs " + std::to_string(need) +
                             " clusters with eligible tools, have " + std::to_string(candidates.size()));
    }
    std::vector<std::size_t> picks;
    picks.reserve(k);
    if (gold.include) picks.push_back(*pool.index_of(gold.name));
    for (std::size_t j : rng.choose(candidates.size(), need)) {
        const auto& m = members[candidates[j]];
        picks.push_back(m[rng.uniform_index(m.size())]);
    }
    return finish(pool, std::move(picks), gold, Strategy::InterClass, false, rng);
}

CandidateToolset sample_intra_class(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                    const GoldSpec& gold, Rng& rng) {
    if (gold.name.empty()) throw InvalidArgument("intra-class sampling requires a gold tool");
    check_gold(pool, gold);
    const std::size_t k = cfg.k;
    const std::size_t home = clusters.cluster_of(gold.name);
    const std::size_t need = gold.include ? k - 1 : k;

    std::vector<std::size_t> picks;
    picks.reserve(k);
    if (gold.include) picks.push_back(*pool.index_of(gold.name));

    std::vector<std::size_t> own = eligible_members(pool, clusters, home, gold.name);
    if (own.size() >= need) {
        for (std::size_t j : rng.choose(own.size(), need)) picks.push_back(own[j]);
        return finish(pool, std::move(picks), gold, Strategy::IntraClass, false, rng);
    }

    picks.insert(picks.end(), own.begin(), own.end());
    std::size_t missing = need - own.size();
    for (std::size_t c : clusters.neighbours(home)) {
        if (missing == 0) break;
        std::vector<std::size_t> extra = eligible_members(pool, clusters, c, gold.name);
        const std::size_t take = std::min(missing, extra.size());
        for (std::size_t j : rng.choose(extra.size(), take)) picks.push_back(extra[j]);
        missing -= take;
    }
    if (missing > 0) {
        throw PoolTooSmall("intra-class sampling could not find " + std::to_string(k) + " eligible tools");
    }
    return finish(pool, std::move(picks), gold, Strategy::IntraClass, true, rng);
}

CandidateToolset sample_mixture(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                const GoldSpec& gold, Rng& rng) {
    const std::array<double, 3> w{static_cast<double>(cfg.mixture_weights[0]),
                                  static_cast<double>(cfg.mixture_weights[1]),
                                  static_cast<double>(cfg.mixture_weights[2])};
    switch (rng.weighted_index(w)) {
        case 0: return sample_random(pool, cfg, gold, rng);
        case 1: return sample_intra_class(pool, clusters, cfg, gold, rng);
        default: return sample_inter_class(pool, clusters, cfg, gold, rng);
    }
}

CandidateToolset sample_candidates(const ToolPool& pool, const ClusterModel& clusters, const SamplerConfig& cfg,
                                   const GoldSpec& gold, Rng& rng) {
    switch (cfg.mode) {
        case Strategy::Random: return sample_random(pool, cfg, gold, rng);
        case Strategy::InterClass: return sample_inter_class(pool, clusters, cfg, gold, rng);
        case Strategy::IntraClass: return sample_intra_class(pool, clusters, cfg, gold, rng);
        case Strategy::Mixture: return sample_mixture(pool, clusters, cfg, gold, rng);
        case Strategy::Retrieval: break;
    }
    throw ConfigError("sampler: retrieval is not a training-time strategy");
}

}  // namespace decitool
