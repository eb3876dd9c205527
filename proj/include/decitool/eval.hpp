#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decitool/backends.hpp"
#include "decitool/clustering.hpp"
#include "decitool/datagen.hpp"
#include "decitool/executor.hpp"
#include "decitool/json.hpp"
#include "decitool/runtime.hpp"
#include "decitool/sampling.hpp"

namespace decitool {

/// How strictly a Call-kind sample must match its gold call.
enum class CorrectnessPolicy { DecisionOnly, ToolMatch, FullMatch };

std::string_view to_string(CorrectnessPolicy p);
CorrectnessPolicy policy_from_string(std::string_view text);

/// Exact ratio of two counts. A zero denominator means "no samples".
struct Fraction {
    std::uint64_t num = 0;
    std::uint64_t den = 0;

    bool defined() const { return den != 0; }
    /// NaN when undefined.
    double value() const;
    /// Compares as rationals; two undefined fractions are equal.
    bool operator==(const Fraction& o) const;
};

struct MetricCounts {
    std::uint64_t n_nos = 0, N_nos = 0;
    std::uint64_t n_s = 0, N_s = 0;
    std::uint64_t n_noc = 0, N_noc = 0;
    std::uint64_t n_c = 0, N_c = 0;

    Fraction p_nosearch() const { return {n_nos, N_nos}; }
    Fraction p_search() const { return {n_s, N_s}; }
    Fraction p_ds() const { return {n_nos + n_s, N_nos + N_s}; }
    Fraction p_nocall() const { return {n_noc, N_noc}; }
    Fraction p_call() const { return {n_c, N_c}; }
    Fraction p_dc() const { return {n_noc + n_c, N_noc + N_c}; }

    bool operator==(const MetricCounts&) const = default;
};

inline constexpr std::array<std::string_view, 6> kMetricNames{"P_NoSearch", "P_Search", "P_DS",
                                                              "P_NoCall",   "P_Call",   "P_DC"};

/// The six rates in kMetricNames order.
std::array<double, 6> metric_values(const MetricCounts& c);

/// Whether a single trace is correct for its sample at the Decision-Search
/// level and at the sample's own level.
bool search_level_correct(const Sample& sample, const DecisionTrace& trace);
bool kind_level_correct(const Sample& sample, const DecisionTrace& trace, CorrectnessPolicy policy);

/// Samples and traces are paired by id; both lists must hold the same ids.
/// Throws IdMismatch.
MetricCounts score_decisions(std::span<const Sample> samples, std::span<const DecisionTrace> traces,
                             CorrectnessPolicy policy);

struct EvalConfig {
    RuntimeConfig runtime;
    SamplerConfig sampler;
    CorrectnessPolicy policy = CorrectnessPolicy::ToolMatch;
    std::size_t n_trials = 6;
    std::uint64_t base_seed = 0;
    /// Redraw candidate toolsets every trial when a cluster model is given.
    bool resample = true;
    std::size_t parallel = 1;
};

struct MetricReport {
    CorrectnessPolicy policy = CorrectnessPolicy::ToolMatch;
    std::size_t trials = 0;
    std::uint64_t base_seed = 0;
    std::string varied = "candidate-set seed";
    std::vector<MetricCounts> per_trial;
    std::array<std::vector<double>, 6> values;
    std::array<double, 6> mean{};
    std::array<double, 6> std{};
};

/// Mean and sample (n - 1) standard deviation; std is 0 for one value.
/// NaN entries are skipped; an all-NaN list yields NaN for both.
std::pair<double, double> mean_and_std(std::span<const double> values);

MetricReport make_report(std::vector<MetricCounts> per_trial, CorrectnessPolicy policy, std::uint64_t base_seed);

/// Candidate toolset used for `sample` in trial `trial`. Without a cluster
/// model, or when the gold tool is not clustered, the stored set is kept.
std::vector<Tool> trial_candidates(const Sample& sample, const ToolPool& pool, const ClusterModel* clusters,
                                   const SamplerConfig& sampler, std::uint64_t trial_seed, std::size_t index);

/// Runs every sample through the decision runtime n_trials times and scores
/// each trial. Trial i draws candidates with derive_seed(base_seed, i).
/// `traces_out`, when given, receives one trace list per trial.
MetricReport run_trials(std::span<const Sample> samples, ModelBackend& backend, const ToolPool& pool,
                        const ClusterModel* clusters, const ApiExecutor& executor, const EvalConfig& cfg,
                        std::vector<std::vector<DecisionTrace>>* traces_out = nullptr);

Json to_json(const MetricCounts& c);
Json to_json(const MetricReport& r);
std::string format_report(const MetricReport& r);

}  // namespace decitool
