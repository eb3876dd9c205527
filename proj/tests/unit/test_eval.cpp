#include <doctest.h>

#include <cmath>

#include "decitool/error.hpp"
#include "decitool/eval.hpp"
#include "decitool/text_metrics.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace decitool;

namespace {

Sample sample(std::string id, SampleKind kind, std::optional<CallCommand> gold = std::nullopt) {
    Sample s;
    s.id = std::move(id);
    s.kind = kind;
    s.gold_call = std::move(gold);
    return s;
}

DecisionTrace trace(std::string id, std::vector<Branch> path, std::optional<CallCommand> call = std::nullopt) {
    DecisionTrace t;
    t.id = std::move(id);
    t.path = path;
    t.branch = path.empty() ? Branch::None : path.back();
    if (call) t.calls.push_back({*call, {}, std::nullopt});
    return t;
}

}  // namespace

TEST_CASE("metric formulas") {
    MetricCounts c;
    c.n_nos = 3;
    c.N_nos = 4;
    c.n_s = 9;
    c.N_s = 10;
    CHECK(c.p_nosearch().value() == 0.75);
    CHECK(c.p_search().value() == 0.9);
    CHECK(c.p_ds() == Fraction{12, 14});
    CHECK(c.p_ds() == Fraction{6, 7});
    MetricCounts d;
    d.n_noc = 2;
    d.N_noc = 4;
    d.n_c = 3;
    d.N_c = 6;
    CHECK(d.p_nocall().value() == 0.5);
    CHECK(d.p_call().value() == 0.5);
    CHECK(d.p_dc().value() == 0.5);
    CHECK(std::isnan(MetricCounts{}.p_call().value()));
}

TEST_CASE("scoring by policy") {
    const CallCommand gold{"get_weather", {{"city", std::string("Paris")}}};
    const CallCommand wrong_args{"get_weather", {{"city", std::string("Rome")}}};
    const CallCommand wrong_tool{"get_stock", {{"symbol", std::string("X")}}};
    std::vector<Sample> samples{sample("a", SampleKind::NoSearch), sample("b", SampleKind::NoCall, gold),
                                sample("c", SampleKind::Call, gold), sample("d", SampleKind::Call, gold),
                                sample("e", SampleKind::Call, gold)};
    std::vector<DecisionTrace> traces{trace("e", {Branch::Search, Branch::Call}, wrong_tool),
                                      trace("a", {Branch::NoSearch}),
                                      trace("b", {Branch::Search, Branch::NoCall}),
                                      trace("c", {Branch::Search, Branch::Call}, gold),
                                      trace("d", {Branch::Search, Branch::Call}, wrong_args)};
    auto dec = score_decisions(samples, traces, CorrectnessPolicy::DecisionOnly);
    CHECK(dec.n_c == 3);
    auto tool = score_decisions(samples, traces, CorrectnessPolicy::ToolMatch);
    CHECK(tool.n_c == 2);
    auto full = score_decisions(samples, traces, CorrectnessPolicy::FullMatch);
    CHECK(full.n_c == 1);
    CHECK(full.n_s == 4);
    CHECK(full.N_s == full.N_noc + full.N_c);

    std::vector<DecisionTrace> missing(traces.begin(), traces.end() - 1);
    CHECK_THROWS_AS(score_decisions(samples, missing, CorrectnessPolicy::ToolMatch), IdMismatch);
    auto renamed = traces;
    renamed[0].id = "zzz";
    CHECK_THROWS_AS(score_decisions(samples, renamed, CorrectnessPolicy::ToolMatch), IdMismatch);
}

TEST_CASE("aborted traces never count as correct") {
    std::vector<Sample> samples{sample("a", SampleKind::NoCall, CallCommand{"x", {}})};
    auto t = trace("a", {Branch::Search});
    t.aborted = true;
    std::vector<DecisionTrace> traces{t};
    auto c = score_decisions(samples, traces, CorrectnessPolicy::ToolMatch);
    CHECK(c.n_s == 0);
    CHECK(c.n_noc == 0);
}

TEST_CASE("score_decisions agrees with the per-sample recount and ignores order") {
    Rng rng(12);
    const CallCommand gold{"f", {{"a", 1.0}}};
    for (int round = 0; round < 50; ++round) {
        std::vector<Sample> samples;
        std::vector<DecisionTrace> traces;
        for (int i = 0; i < 30; ++i) {
            const auto kind = static_cast<SampleKind>(rng.uniform_index(3));
            samples.push_back(sample("s" + std::to_string(i), kind, kind == SampleKind::NoSearch ? std::nullopt : std::optional(gold)));
            const Branch options[] = {Branch::NoSearch, Branch::NoCall, Branch::Call, Branch::Search};
            const Branch end = options[rng.uniform_index(4)];
            std::vector<Branch> path = end == Branch::NoSearch ? std::vector<Branch>{end}
                                       : end == Branch::Search ? std::vector<Branch>{end}
                                                               : std::vector<Branch>{Branch::Search, end};
            traces.push_back(trace("s" + std::to_string(i), path,
                                   end == Branch::Call ? std::optional(rng.uniform_index(2) ? gold : CallCommand{"g", {}})
                                                       : std::nullopt));
        }
        auto counts = score_decisions(samples, traces, CorrectnessPolicy::ToolMatch);
        auto oracle = oracles::recount(samples, traces, 1);
        const Fraction got[6] = {counts.p_nosearch(), counts.p_search(), counts.p_ds(),
                                 counts.p_nocall(),   counts.p_call(),   counts.p_dc()};
        for (int m = 0; m < 6; ++m) {
            CHECK(got[m].num == static_cast<std::uint64_t>(oracle.num[m]));
            CHECK(got[m].den == static_cast<std::uint64_t>(oracle.den[m]));
        }
        rng.shuffle(samples);
        CHECK(score_decisions(samples, traces, CorrectnessPolicy::ToolMatch) == counts);
    }
}

TEST_CASE("mean and sample standard deviation") {
    std::vector<double> one{0.7};
    CHECK(mean_and_std(one) == std::pair<double, double>{0.7, 0.0});
    std::vector<double> two{0.8, 0.9};
    auto [m, s] = mean_and_std(two);
    CHECK(m == doctest::Approx(0.85));
    CHECK(s == doctest::Approx(0.0707106781).epsilon(1e-8));
    std::vector<double> same(6, 0.5);
    CHECK(mean_and_std(same).second == 0.0);
}

TEST_CASE("run_trials with deterministic and forced backends") {
    auto pool = fixtures::weather_pool();
    auto exec = ApiExecutor::mock_all(pool, "{}");
    exec.bind_specs(pool);
    std::vector<Sample> samples;
    auto add = [&](std::string id, SampleKind kind, std::string query, std::optional<CallCommand> gold) {
        Sample s = sample(std::move(id), kind, std::move(gold));
        s.query = std::move(query);
        if (kind != SampleKind::NoSearch) s.candidate_tools = {"get_weather", "get_stock", "news_headlines"};
        samples.push_back(s);
    };
    add("n1", SampleKind::NoSearch, "tell me a joke", std::nullopt);
    add("c1", SampleKind::Call, "weather in Paris", CallCommand{"get_weather", {{"city", std::string("Paris")}}});
    add("o1", SampleKind::NoCall, "book a flight", CallCommand{"book_flight", {{"origin", std::string("A")}, {"destination", std::string("B")}}});

    // Always right: rules keyed on the query text inside each prompt.
    ScriptedBackend oracle_backend({}, {{{"API response"}, {"sunny"}, {}},
                                        {{"None of the candidate"}, {"cannot"}, {}},
                                        {{"Query: weather in Paris"}, {R"([CALL] get_weather(city="Paris"))"}, {}},
                                        {{"Query: book a flight"}, {"[NOCALL]"}, {}},
                                        {{"tell me a joke"}, {"[ANSWER] knock knock"}, {}},
                                        {{"weather in Paris"}, {"[SEARCH]"}, {}},
                                        {{"book a flight"}, {"[SEARCH]"}, {}}});
    EvalConfig cfg;
    auto report = run_trials(samples, oracle_backend, pool, nullptr, exec, cfg);
    CHECK(report.trials == 6);
    for (int m = 0; m < 6; ++m) {
        CHECK(report.mean[m] == 1.0);
        CHECK(report.std[m] == 0.0);
    }

    ScriptedBackend forced({}, {{{"Candidate tools"}, {"[NOCALL]"}, {}},
                                {{"None of the candidate"}, {"fine"}, {}},
                                {{}, {"[SEARCH]"}, {}}});
    cfg.n_trials = 2;
    auto r2 = run_trials(samples, forced, pool, nullptr, exec, cfg);
    CHECK(r2.mean[4] == 0.0);  // P_Call
    CHECK(r2.mean[3] == 1.0);  // P_NoCall
    CHECK(r2.mean[0] == 0.0);  // P_NoSearch

    cfg.n_trials = 0;
    CHECK_THROWS_AS(run_trials(samples, forced, pool, nullptr, exec, cfg), InvalidArgument);

    auto j = to_json(report);
    CHECK(j["trials"] == 6);
    CHECK(j["policy"] == "tool-match");
    CHECK(j["metrics"]["P_DS"]["mean"] == 1.0);
    const auto table = format_report(report);
    CHECK(table.find("P_NoSearch") != std::string::npos);
    CHECK(table.find("100.00") != std::string::npos);
}

TEST_CASE("trial candidates are redrawn per trial when clusters are given") {
    auto pool = fixtures::topic_pool(60);
    HashEmbeddingProvider p;
    std::vector<LabeledVector> pts;
    for (const auto& t : pool.tools()) pts.push_back({t.name, embed(p, t.description)});
    KMeansOptions opt;
    opt.m = 6;
    auto clusters = fit_kmeans(pts, opt);
    Sample s = sample("x", SampleKind::Call, CallCommand{"tool_0005", {}});
    s.candidate_tools = {"tool_0005", "tool_0001", "tool_0002", "tool_0003", "tool_0004"};
    SamplerConfig sc;
    auto a = trial_candidates(s, pool, &clusters, sc, derive_seed(1, 0), 0);
    auto b = trial_candidates(s, pool, &clusters, sc, derive_seed(1, 1), 0);
    auto a2 = trial_candidates(s, pool, &clusters, sc, derive_seed(1, 0), 0);
    CHECK(a == a2);
    bool has_gold = false;
    for (const auto& t : b) has_gold |= t.name == "tool_0005";
    CHECK(has_gold);
    auto kept = trial_candidates(s, pool, nullptr, sc, 0, 0);
    CHECK(kept.size() == 5);
    CHECK(kept[0].name == "tool_0005");
}

TEST_CASE("bleu") {
    CHECK(bleu("the cat sat on the mat", "the cat sat on the mat") == doctest::Approx(1.0));
    CHECK(bleu("the cat sat", "the cat sat down", 3) == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-9));
    CHECK(bleu("alpha beta gamma", "delta epsilon zeta") < 0.01);
    CHECK(bleu("", "reference") == 0.0);
    CHECK_THROWS_AS(bleu("x", "  ,, "), EmptyReference);
    std::vector<std::string> refs{"a totally different sentence", "the cat sat on the mat"};
    CHECK(bleu("the cat sat on the mat", refs) == doctest::Approx(1.0));
    // No bigram or trigram matches: p2 = 1/4 and p3 = 1/3 after smoothing.
    const double smoothed = bleu("a x b y", "a b c d", 3);
    CHECK(smoothed == doctest::Approx(std::cbrt(0.5 * 0.25 * (1.0 / 3.0))).epsilon(1e-9));
}

TEST_CASE("rouge") {
    auto id = rouge("the quick brown fox", "the quick brown fox");
    CHECK(id.rouge1_f == 1.0);
    CHECK(id.rouge2_f == 1.0);
    CHECK(id.rougeL_f == 1.0);
    auto r = rouge("a b c", "a c d");
    CHECK(r.rouge1_f == doctest::Approx(2.0 / 3.0));
    CHECK(r.rougeL_f == doctest::Approx(2.0 / 3.0));
    CHECK(r.rouge2_f == 0.0);
    auto none = rouge("x y", "z w");
    CHECK(none.rouge1_f == 0.0);
    CHECK(none.rougeL_f == 0.0);
    CHECK(rouge("", "").rouge1_f == 0.0);
    // F1 does not depend on which side is the candidate.
    auto ab = rouge("a b b c", "a b d");
    auto ba = rouge("a b d", "a b b c");
    CHECK(ab.rouge1_f == doctest::Approx(ba.rouge1_f));
    CHECK(ab.rougeL_f == doctest::Approx(ba.rougeL_f));
}
