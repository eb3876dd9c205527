#include <doctest.h>

#include <set>

#include "decitool/datagen.hpp"
#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "support/fixtures.hpp"

using namespace decitool;

namespace {

std::string pairs_json(const std::string& api, int n, int bad = 0) {
    Json arr = Json::array();
    for (int i = 0; i < n; ++i) {
        arr.push_back({{"query", "question " + std::to_string(i)},
                       {"call", {{"api_name", api}, {"args", {{"query", "q" + std::to_string(i)}}}}}});
    }
    for (int i = 0; i < bad; ++i) arr.push_back({{"query", "broken"}, {"call", {{"api_name", api}, {"args", {{"limit", "x"}}}}}});
    return "Here you go:\n```json\n" + arr.dump() + "\n```";
}

struct World {
    ToolPool pool = fixtures::topic_pool(60);
    ClusterModel clusters;
    PairsByTool pairs;

    World() {
        HashEmbeddingProvider p;
        std::vector<LabeledVector> pts;
        for (const auto& t : pool.tools()) pts.push_back({t.name, embed(p, t.description)});
        KMeansOptions opt;
        opt.m = 6;
        clusters = fit_kmeans(pts, opt);
        for (const auto& t : pool.tools()) {
            for (int i = 0; i < 4; ++i) {
                pairs[t.name].push_back({t.name, t.name + " question " + std::to_string(i),
                                         CallCommand{t.name, {{"query", std::string("q")}}}});
            }
        }
    }
};

}  // namespace

TEST_CASE("generation keeps well-formed pairs and counts the rest") {
    auto pool = fixtures::topic_pool(3);
    const Tool& t = pool.tools()[0];
    ScriptedBackend gen({pairs_json(t.name, 7, 3)});
    auto res = generate_pairs(t, gen, 10, PromptTemplates::defaults());
    CHECK(res.pairs.size() == 7);
    CHECK(res.malformed == 3);
    CHECK(res.pairs[0].query == "question 0");

    ScriptedBackend many({pairs_json(t.name, 12)});
    CHECK(generate_pairs(t, many, 10, PromptTemplates::defaults()).pairs.size() == 10);

    ScriptedBackend junk({"no json here"});
    CHECK_THROWS_AS(generate_pairs(t, junk, 10, PromptTemplates::defaults()), AllMalformed);
    ScriptedBackend wrong_api({pairs_json("other_api", 3)});
    CHECK_THROWS_AS(generate_pairs(t, wrong_api, 10, PromptTemplates::defaults()), AllMalformed);
}

TEST_CASE("checking filters pairs in order") {
    auto pool = fixtures::topic_pool(2);
    const auto& t = pool.tools()[0];
    std::vector<QueryCallPair> pairs;
    for (int i = 1; i <= 5; ++i) pairs.push_back({t.name, "q" + std::to_string(i), CallCommand{t.name, {{"query", std::string("x")}}}});

    ScriptedBackend all({"[true, true, true, true, true]"});
    CHECK(check_pairs(pairs, all, pool, PromptTemplates::defaults()).size() == 5);
    ScriptedBackend none({"[false,false,false,false,false]"});
    CHECK(check_pairs(pairs, none, pool, PromptTemplates::defaults()).empty());
    ScriptedBackend odd({"[true, false, true, false, true]"});
    auto kept = check_pairs(pairs, odd, pool, PromptTemplates::defaults());
    REQUIRE(kept.size() == 3);
    CHECK(kept[0].query == "q1");
    CHECK(kept[1].query == "q3");
    CHECK(kept[2].query == "q5");
    ScriptedBackend short_reply({"[true]"});
    CHECK_THROWS_AS(check_pairs(pairs, short_reply, pool, PromptTemplates::defaults()), BackendError);
    auto prompt = odd.consumed();
    CHECK(prompt.size() == 1);
}

TEST_CASE("run_generation reports per stage") {
    auto pool = fixtures::topic_pool(3);
    std::vector<ScriptRule> gen_rules, chk_rules;
    gen_rules.push_back({{"Tool name: tool_0000\n"}, {pairs_json("tool_0000", 4, 1)}, {}});
    gen_rules.push_back({{"Tool name: tool_0001\n"}, {"garbage"}, {}});
    gen_rules.push_back({{"Tool name: tool_0002\n"}, {pairs_json("tool_0002", 2)}, {}});
    chk_rules.push_back({{"Tool name: tool_0000\n"}, {"[true, false, true, true]"}, {}});
    chk_rules.push_back({{"Tool name: tool_0002\n"}, {"[true, true]"}, {}});
    ScriptedBackend gen({}, gen_rules), chk({}, chk_rules);
    auto rep = run_generation(pool, gen, chk, 10, PromptTemplates::defaults(), 2);
    CHECK(rep.generated == 7);
    CHECK(rep.malformed == 1);
    CHECK(rep.rejected == 1);
    CHECK(rep.failed_tools == std::vector<std::string>{"tool_0001"});
    CHECK(rep.pairs.at("tool_0000").size() == 3);
    CHECK(rep.pairs.at("tool_0002").size() == 2);
}

TEST_CASE("assembly honours proportions and sample invariants") {
    World w;
    AssemblyOptions opts;
    opts.seed = 3;
    std::vector<std::string> queries{"tell me a joke", "how are you", "what is love"};
    auto split = assemble_dataset(w.pool, w.clusters, w.pairs, queries, opts);
    auto stats = compute_stats(split);
    CHECK(stats.train.nosearch + stats.valid.nosearch == 3);
    CHECK(stats.train.call + stats.valid.call == 144);  // floor(0.6 * 240)
    CHECK(stats.train.nocall + stats.valid.nocall == 96);
    CHECK(stats.valid.total() == 24);  // round(0.1 * 243)
    std::set<std::string> ids;
    for (const auto* part : {&split.train, &split.valid}) {
        for (const auto& s : *part) {
            CHECK_NOTHROW(validate_sample(s, &w.pool));
            CHECK(ids.insert(s.id).second);
            if (s.kind == SampleKind::NoCall) {
                for (const auto& c : s.candidate_tools) CHECK(c != s.gold_call->api_name);
            }
            if (s.kind != SampleKind::NoSearch) CHECK(s.candidate_tools.size() == 5);
        }
    }
    auto again = assemble_dataset(w.pool, w.clusters, w.pairs, queries, opts);
    CHECK(to_json(again.train.front()) == to_json(split.train.front()));

    opts.valid_counts = std::array<std::size_t, 3>{1, 10, 20};
    auto exact = compute_stats(assemble_dataset(w.pool, w.clusters, w.pairs, queries, opts));
    CHECK(exact.valid.nosearch == 1);
    CHECK(exact.valid.nocall == 10);
    CHECK(exact.valid.call == 20);
    opts.valid_counts = std::array<std::size_t, 3>{4, 0, 0};
    CHECK_THROWS_AS(assemble_dataset(w.pool, w.clusters, w.pairs, queries, opts), RangeError);

    AssemblyOptions bad;
    bad.proportions = {0.7, 0.4};
    CHECK_THROWS_AS(assemble_dataset(w.pool, w.clusters, w.pairs, queries, bad), InvalidArgument);
    CHECK_THROWS_AS(assemble_dataset(w.pool, w.clusters, w.pairs, {}, AssemblyOptions{}), InvalidArgument);
}

TEST_CASE("randomized pipeline runs keep every sample valid") {
    World w;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        AssemblyOptions opts;
        opts.seed = seed;
        opts.sampler.mode = static_cast<Strategy>(seed % 4);
        opts.proportions = seed % 2 ? Proportions{0.5, 0.5} : Proportions{0.6, 0.4};
        auto split = assemble_dataset(w.pool, w.clusters, w.pairs, {"a", "b"}, opts);
        for (const auto* part : {&split.train, &split.valid}) {
            for (const auto& s : *part) CHECK_NOTHROW(validate_sample(s, &w.pool));
        }
    }
}

TEST_CASE("validate_sample rejects broken records") {
    Sample s;
    s.id = "x";
    s.kind = SampleKind::Call;
    s.candidate_tools = {"a", "b"};
    s.gold_call = CallCommand{"c", {}};
    CHECK_THROWS_AS(validate_sample(s, nullptr), ValidationError);
    s.kind = SampleKind::NoCall;
    s.gold_call = CallCommand{"a", {}};
    CHECK_THROWS_AS(validate_sample(s, nullptr), ValidationError);
    s.kind = SampleKind::NoSearch;
    CHECK_THROWS_AS(validate_sample(s, nullptr), ValidationError);
}

TEST_CASE("dataset files, SFT export and stats block") {
    World w;
    AssemblyOptions opts;
    auto split = assemble_dataset(w.pool, w.clusters, w.pairs, {"hi there"}, opts);
    auto dir = fixtures::scratch_dir("datagen");
    write_dataset(split, dir);
    auto back = read_dataset(dir);
    REQUIRE(back.train.size() == split.train.size());
    for (std::size_t i = 0; i < back.train.size(); ++i) CHECK(to_json(back.train[i]) == to_json(split.train[i]));

    export_sft(split, w.pool, PromptTemplates::defaults(), dir / "sft.jsonl", true);
    auto imported = import_sft(dir / "sft.jsonl");
    CHECK(imported.train.size() == split.train.size());
    CHECK(imported.valid.size() == split.valid.size());
    for (std::size_t i = 0; i < imported.valid.size(); ++i) CHECK(to_json(imported.valid[i]) == to_json(split.valid[i]));

    for (const auto& row : read_jsonl(dir / "sft.jsonl")) {
        const auto& msgs = row["messages"];
        const auto kind = row["meta"]["sample"]["kind"].get<std::string>();
        if (kind == "nosearch") {
            CHECK(msgs.back()["content"] == "[ANSWER]");
        } else if (kind == "call") {
            CHECK(msgs[2]["content"] == "[SEARCH]");
            CHECK(msgs.back()["content"].get<std::string>().rfind("[CALL] tool_", 0) == 0);
        } else {
            CHECK(msgs.back()["content"] == "[NOCALL]");
        }
    }

    DatasetStats stats{{1807, 3114, 4664}, {193, 346, 526}, {0, 298, 445}};
    const std::string block = format_stats(stats);
    CHECK(block.find("Train        1807       3114       4664       9585") != std::string::npos);
    CHECK(block.find("Test            -        298        445        743") != std::string::npos);

    write_text_file(dir / "q.jsonl", "{\"query\": \"one\"}\n\n{\"instruction\": \"two\"}\n");
    CHECK(read_queries(dir / "q.jsonl") == std::vector<std::string>{"one", "two"});
    write_text_file(dir / "q.txt", "alpha\nbeta\r\n");
    CHECK(read_queries(dir / "q.txt") == std::vector<std::string>{"alpha", "beta"});
    std::filesystem::remove_all(dir);
}
