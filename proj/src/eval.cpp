#include "decitool/eval.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "decitool/error.hpp"
#include "decitool/rng.hpp"

namespace decitool {

std::string_view to_string(CorrectnessPolicy p) {
    switch (p) {
        case CorrectnessPolicy::DecisionOnly: return "decision-only";
        case CorrectnessPolicy::ToolMatch: return "tool-match";
        case CorrectnessPolicy::FullMatch: return "full-match";
    }
    return "tool-match";
}

CorrectnessPolicy policy_from_string(std::string_view text) {
    if (text == "decision-only" || text == "decision_only" || text == "decision") return CorrectnessPolicy::DecisionOnly;
    if (text == "tool-match" || text == "tool_match" || text == "tool") return CorrectnessPolicy::ToolMatch;
    if (text == "full-match" || text == "full_match" || text == "full") return CorrectnessPolicy::FullMatch;
    throw ConfigError("unknown correctness policy '" + std::string(text) + "'");
}

double Fraction::value() const {
    if (den == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(num) / static_cast<double>(den);
}

bool Fraction::operator==(const Fraction& o) const {
    if (den == 0 || o.den == 0) return den == o.den;
    return static_cast<unsigned __int128>(num) * o.den == static_cast<unsigned __int128>(o.num) * den;
}

std::array<double, 6> metric_values(const MetricCounts& c) {
    return {c.p_nosearch().value(), c.p_search().value(), c.p_ds().value(),
            c.p_nocall().value(),   c.p_call().value(),   c.p_dc().value()};
}

bool search_level_correct(const Sample& sample, const DecisionTrace& trace) {
    if (sample.kind == SampleKind::NoSearch) return trace.branch == Branch::NoSearch;
    return (trace.branch == Branch::NoCall || trace.branch == Branch::Call) && trace.visited(Branch::Search);
}

bool kind_level_correct(const Sample& sample, const DecisionTrace& trace, CorrectnessPolicy policy) {
    switch (sample.kind) {
        case SampleKind::NoSearch: return trace.branch == Branch::NoSearch;
        case SampleKind::NoCall: return trace.branch == Branch::NoCall && trace.visited(Branch::Search);
        case SampleKind::Call: {
            if (trace.branch != Branch::Call || !trace.visited(Branch::Search)) return false;
            const CallCommand* call = trace.parsed_call();
            if (policy == CorrectnessPolicy::DecisionOnly) return true;
            if (!call || !sample.gold_call) return false;
            if (policy == CorrectnessPolicy::ToolMatch) return call->api_name == sample.gold_call->api_name;
            return same_call(*call, *sample.gold_call);
        }
    }
    return false;
}

MetricCounts score_decisions(std::span<const Sample> samples, std::span<const DecisionTrace> traces,
                             CorrectnessPolicy policy) {
    std::map<std::string_view, const DecisionTrace*> by_id;
    for (const auto& t : traces) {
        if (!by_id.emplace(t.id, &t).second) throw IdMismatch("duplicate trace id '" + t.id + "'");
    }
    if (samples.size() != traces.size()) {
        throw IdMismatch(std::to_string(samples.size()) + " samples but " + std::to_string(traces.size()) + " traces");
    }
    MetricCounts c;
    for (const auto& s : samples) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) throw IdMismatch("no trace for sample '" + s.id + "'");
        const DecisionTrace& t = *it->second;
        const bool search_ok = search_level_correct(s, t);
        const bool kind_ok = kind_level_correct(s, t, policy);
        switch (s.kind) {
            case SampleKind::NoSearch:
                ++c.N_nos;
                c.n_nos += search_ok;
                break;
            case SampleKind::NoCall:
                ++c.N_s;
                c.n_s += search_ok;
                ++c.N_noc;
                c.n_noc += kind_ok;
                break;
            case SampleKind::Call:
                ++c.N_s;
                c.n_s += search_ok;
                ++c.N_c;
                c.n_c += kind_ok;
                break;
        }
    }
    return c;
}

std::pair<double, double> mean_and_std(std::span<const double> values) {
    std::vector<double> v;
    for (double x : values) {
        if (!std::isnan(x)) v.push_back(x);
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (v.empty()) return {nan, nan};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

MetricReport make_report(std::vector<MetricCounts> per_trial, CorrectnessPolicy policy, std::uint64_t base_seed) {
    MetricReport r;
    r.policy = policy;
    r.base_seed = base_seed;
    r.trials = per_trial.size();
    for (const auto& c : per_trial) {
        const auto vals = metric_values(c);
        for (std::size_t m = 0; m < 6; ++m) r.values[m].push_back(vals[m]);
    }
    for (std::size_t m = 0; m < 6; ++m) std::tie(r.mean[m], r.std[m]) = mean_and_std(r.values[m]);
    r.per_trial = std::move(per_trial);
    return r;
}

std::vector<Tool> trial_candidates(const Sample& sample, const ToolPool& pool, const ClusterModel* clusters,
                                   const SamplerConfig& sampler, std::uint64_t trial_seed, std::size_t index) {
    auto stored = [&] {
        std::vector<Tool> out;
        for (const auto& name : sample.candidate_tools) out.push_back(pool.at(name));
        return out;
    };
    if (!clusters || sample.kind == SampleKind::NoSearch || !sample.gold_call) return stored();
    const Tool* gold = pool.find_by_api(sample.gold_call->api_name);
    if (!gold || !clusters->contains(gold->name)) return stored();

    Rng rng(derive_seed(trial_seed, static_cast<std::uint64_t>(index)));
    const GoldSpec spec =
        sample.kind == SampleKind::Call ? GoldSpec::included(gold->name) : GoldSpec::excluded(gold->name);
    return sample_candidates(pool, *clusters, sampler, spec, rng).tools;
}

MetricReport run_trials(std::span<const Sample> samples, ModelBackend& backend, const ToolPool& pool,
                        const ClusterModel* clusters, const ApiExecutor& executor, const EvalConfig& cfg,
                        std::vector<std::vector<DecisionTrace>>* traces_out) {
    if (cfg.n_trials == 0) throw InvalidArgument("run_trials: at least one trial is required");
    std::vector<MetricCounts> per_trial;
    if (traces_out) traces_out->clear();

    for (std::size_t trial = 0; trial < cfg.n_trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(cfg.base_seed, static_cast<std::uint64_t>(trial));
        std::vector<DecisionTrace> traces(samples.size());
        std::vector<std::exception_ptr> errors(samples.size());

        auto work = [&](std::size_t i) {
            try {
                const Sample& s = samples[i];
                std::vector<Tool> cands = cfg.resample
                                              ? trial_candidates(s, pool, clusters, cfg.sampler, trial_seed, i)
                                              : trial_candidates(s, pool, nullptr, cfg.sampler, trial_seed, i);
                traces[i] = answer_query(s.query, backend, pool, nullptr, executor, cfg.runtime, std::move(cands));
                traces[i].id = s.id;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        };
        const std::size_t threads = std::max<std::size_t>(1, cfg.parallel);
        if (threads == 1) {
            for (std::size_t i = 0; i < samples.size(); ++i) work(i);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> workers;
            for (std::size_t t = 0; t < threads; ++t) {
                workers.emplace_back([&] {
                    for (std::size_t i = next++; i < samples.size(); i = next++) work(i);
                });
            }
            for (auto& w : workers) w.join();
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
        per_trial.push_back(score_decisions(samples, traces, cfg.policy));
        if (traces_out) traces_out->push_back(std::move(traces));
    }
    return make_report(std::move(per_trial), cfg.policy, cfg.base_seed);
}

namespace {

Json number_or_null(double v) { return std::isnan(v) ? Json(nullptr) : Json(v); }

}  // namespace

Json to_json(const MetricCounts& c) {
    return Json{{"n_nos", c.n_nos}, {"N_nos", c.N_nos}, {"n_s", c.n_s},     {"N_s", c.N_s},
                {"n_noc", c.n_noc}, {"N_noc", c.N_noc}, {"n_c", c.n_c},     {"N_c", c.N_c}};
}

Json to_json(const MetricReport& r) {
    Json metrics = Json::object();
    for (std::size_t m = 0; m < 6; ++m) {
        Json per = Json::array();
        for (double v : r.values[m]) per.push_back(number_or_null(v));
        metrics[std::string(kMetricNames[m])] = {
            {"mean", number_or_null(r.mean[m])}, {"std", number_or_null(r.std[m])}, {"per_trial", per}};
    }
    Json counts = Json::array();
    for (const auto& c : r.per_trial) counts.push_back(to_json(c));
    return Json{{"trials", r.trials},
                {"policy", to_string(r.policy)},
                {"base_seed", r.base_seed},
                {"varied", r.varied},
                {"metrics", metrics},
                {"counts", counts}};
}

std::string format_report(const MetricReport& r) {
    std::ostringstream out;
    out << "Decision accuracy over " << r.trials << " trial" << (r.trials == 1 ? "" : "s") << " (policy "
        << to_string(r.policy) << ", varied " << r.varied << ")\n";
    out << std::left << std::setw(8) << "metric" << std::right;
    for (auto name : kMetricNames) out << std::setw(12) << name;
    out << "\n";
    auto row = [&](const char* label, const std::array<double, 6>& v) {
        out << std::left << std::setw(8) << label << std::right;
        for (double x : v) {
            if (std::isnan(x)) {
                out << std::setw(12) << "-";
            } else {
                std::ostringstream cell;
                cell << std::fixed << std::setprecision(2) << 100.0 * x;
                out << std::setw(12) << cell.str();
            }
        }
        out << "\n";
    };
    row("mean", r.mean);
    row("std", r.std);
    return out.str();
}

}  // namespace decitool
