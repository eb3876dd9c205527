#include <doctest.h>

#include "decitool/error.hpp"
#include "decitool/runtime.hpp"
#include "support/fixtures.hpp"

using namespace decitool;

namespace {

struct Rig {
    ToolPool pool = fixtures::weather_pool();
    ApiExecutor executor;
    RuntimeConfig cfg;
    std::vector<Tool> candidates;

    Rig() {
        std::map<std::string, ApiBinding> b;
        ApiBinding weather;
        weather.kind = BindingKind::Mock;
        weather.canned = R"({"city": "{city}", "temp_c": 18})";
        b["get_weather"] = weather;
        executor = ApiExecutor(b);
        executor.bind_specs(pool);
        candidates = {pool.at("get_weather"), pool.at("get_stock"), pool.at("translate_text")};
    }

    DecisionTrace run(ScriptedBackend& backend, std::string_view q = "What's the weather in Paris?") {
        return answer_query(q, backend, pool, nullptr, executor, cfg, candidates);
    }
};

}  // namespace

TEST_CASE("branch 1: direct answer") {
    Rig rig;
    ScriptedBackend b({"[ANSWER] hi"});
    auto t = rig.run(b, "hello");
    CHECK(t.branch == Branch::NoSearch);
    CHECK(t.final_answer == "hi");
    CHECK(t.candidate_tools.empty());
    CHECK(t.calls.empty());
    CHECK(rig.executor.executions() == 0);
}

TEST_CASE("branch 3: no suitable tool") {
    Rig rig;
    ScriptedBackend b({"[SEARCH]", "[NOCALL]", "direct answer"});
    auto t = rig.run(b);
    CHECK(t.branch == Branch::NoCall);
    CHECK(t.path == std::vector<Branch>{Branch::Search, Branch::NoCall});
    CHECK(t.final_answer == "direct answer");
    CHECK(t.candidate_tools.size() == 3);
    CHECK(rig.executor.executions() == 0);
}

TEST_CASE("branch 3 consults the retrieval hook") {
    Rig rig;
    std::string seen;
    rig.cfg.nocall_retrieval = [&](std::string_view q) {
        seen = q;
        return std::optional<std::string>("from the notes");
    };
    ScriptedBackend b({"[SEARCH]", "[NOCALL]"}, {{{"from the notes"}, {"[ANSWER] with context"}, {}}});
    auto t = rig.run(b, "q");
    CHECK(seen == "q");
    CHECK(t.final_answer == "with context");
}

TEST_CASE("branch 4: call, execute, synthesize") {
    Rig rig;
    ScriptedBackend b({"[SEARCH]", R"([CALL] get_weather(city="Paris"))", "It is 18 degrees in Paris."});
    auto t = rig.run(b);
    CHECK(t.branch == Branch::Call);
    REQUIRE(t.api_response() != nullptr);
    CHECK(t.api_response()->body == R"({"city": "Paris", "temp_c": 18})");
    CHECK(t.parsed_call()->api_name == "get_weather");
    CHECK(t.final_answer == "It is 18 degrees in Paris.");
    CHECK(rig.executor.executions() == 1);
    CHECK(t.steps.size() == 3);
    CHECK(t.steps[2].stage == "synthesis");
}

TEST_CASE("protocol violations re-prompt at most twice") {
    Rig rig;
    ScriptedBackend b({"hmm", "still no", "nope"});
    auto t = rig.run(b);
    CHECK(t.aborted);
    CHECK(t.reprompts == 2);
    CHECK(t.branch == Branch::None);
    CHECK(b.calls() == 3);

    ScriptedBackend recover({"hmm", "[ANSWER] ok"});
    auto r = rig.run(recover);
    CHECK_FALSE(r.aborted);
    CHECK(r.reprompts == 1);
    CHECK(r.branch == Branch::NoSearch);

    ScriptedBackend bad_call({"[SEARCH]", "[CALL] get_weather(city=)", "[CALL] get_weather(units=\"c\")",
                              "[CALL] launch_rocket()"});
    auto c = rig.run(bad_call);
    CHECK(c.aborted);
    CHECK(c.branch == Branch::Search);
    CHECK(c.reprompts == 2);
    CHECK(rig.executor.executions() == 0);
}

TEST_CASE("a call to an API without a binding propagates UnknownApi") {
    Rig rig;
    ScriptedBackend b({"[SEARCH]", R"([CALL] get_stock(symbol="ACME"))", "sorry"});
    CHECK_THROWS_AS(rig.run(b), UnknownApi);
}

TEST_CASE("multi-round calls") {
    Rig rig;
    rig.cfg.max_rounds = 2;
    ScriptedBackend b({"[SEARCH]", R"([CALL] get_weather(city="Paris"))", R"([CALL] get_weather(city="Rome"))",
                       "Paris 18, Rome 18"});
    auto t = rig.run(b);
    CHECK(t.calls.size() == 2);
    CHECK(t.final_answer == "Paris 18, Rome 18");
}

TEST_CASE("retrieval ranks by cosine and breaks ties by name") {
    auto pool = fixtures::weather_pool();
    HashEmbeddingProvider p;
    auto top = retrieve_candidates(pool, p, pool.at("get_stock").description, 3);
    CHECK(top.tools.front().name == "get_stock");
    CHECK(top.strategy_used == Strategy::Retrieval);
    auto all = retrieve_candidates(pool, p, "zzz qqq", pool.size());
    CHECK(all.tools.size() == pool.size());
    // Every similarity is zero, so the order is by name.
    for (std::size_t i = 1; i < all.tools.size(); ++i) CHECK(all.tools[i - 1].name < all.tools[i].name);
    CHECK_THROWS_AS(retrieve_candidates(pool, p, "x", pool.size() + 1), PoolTooSmall);

    CachedEmbedder cache(p);
    Rig rig;
    ScriptedBackend b({"[SEARCH]", "[NOCALL]", "fine"});
    auto t = answer_query("share price", b, rig.pool, &cache, rig.executor, rig.cfg);
    CHECK(t.candidate_tools.size() == 5);
    ScriptedBackend b2({"[SEARCH]"});
    CHECK_THROWS_AS(answer_query("x", b2, rig.pool, nullptr, rig.executor, rig.cfg), ConfigError);
}

TEST_CASE("traces replay identically and round-trip through json") {
    Rig rig;
    auto script = std::vector<std::string>{"[SEARCH]", R"([CALL] get_weather(city="Paris"))", "done"};
    ScriptedBackend a(script), b(script);
    auto ta = rig.run(a);
    auto tb = rig.run(b);
    CHECK(ta == tb);
    CHECK(trace_from_json(to_json(ta)) == ta);
}
