#include <doctest.h>

#include <sstream>

#include "decitool/commands.hpp"
#include "decitool/datagen.hpp"
#include "decitool/io.hpp"
#include "support/fixtures.hpp"

using namespace decitool;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args, const std::string& input = "") {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = run_cli(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("missing pool file exits 2 naming the path") {
    auto r = cli({"cluster", "--pool", "/definitely/missing/pool.json", "--out", "/tmp/x.json"});
    CHECK(r.code == 2);
    CHECK(r.err.find("/definitely/missing/pool.json") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"--set", "nope.key=1", "cluster"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("cluster writes a model and a size histogram") {
    auto dir = fixtures::scratch_dir("cli-cluster");
    save_pool(fixtures::topic_pool(977), dir / "pool.json");
    auto r = cli({"cluster", "--pool", (dir / "pool.json").string(), "--out", (dir / "c.json").string()});
    REQUIRE(r.code == 0);
    auto model = load_clusters(dir / "c.json");
    CHECK(model.m() == 30);
    for (auto s : model.sizes()) CHECK(s > 0);
    CHECK(r.out.find("clustered 977 tools into 30 clusters") != std::string::npos);

    auto one = cli({"cluster", "--pool", (dir / "pool.json").string(), "--out", (dir / "c1.json").string(), "-m", "1"});
    REQUIRE(one.code == 0);
    CHECK(load_clusters(dir / "c1.json").sizes() == std::vector<std::size_t>{977});
    fs::remove_all(dir);
}

TEST_CASE("split-pool, build and export-sft from a config file") {
    auto dir = fixtures::scratch_dir("cli-build");
    save_pool(fixtures::topic_pool(80), dir / "pool.json");
    std::vector<Json> pairs;
    for (int i = 0; i < 80; ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "tool_%04d", i);
        for (int q = 0; q < 3; ++q) {
            pairs.push_back({{"tool", name},
                             {"query", std::string("use ") + name + " #" + std::to_string(q)},
                             {"call", {{"api_name", name}, {"args", {{"query", "x"}}}}}});
        }
    }
    write_text_file(dir / "pairs.jsonl", to_jsonl(pairs));
    write_text_file(dir / "queries.txt", "how are you\ntell me a joke\nwhat is the meaning of life\n");
    write_text_file(dir / "empty.txt", "\n\n");
    write_text_file(dir / "decitool.toml", R"(
seed = 7
[paths]
pool = "pool.json"
pool_train = "train_pool.json"
pool_test = "test_pool.json"
clusters = "clusters.json"
pairs = "pairs.jsonl"
nosearch_queries = "queries.txt"
dataset = "out"
[clustering]
m = 8
[dataset]
train_tools = 50
)");
    const std::string cfg = (dir / "decitool.toml").string();
    REQUIRE(cli({"--config", cfg, "split-pool"}).code == 0);
    REQUIRE(cli({"--config", cfg, "cluster"}).code == 0);

    auto empty = cli({"--config", cfg, "--set", "paths.nosearch_queries=empty.txt", "--set", "paths.dataset=never", "build"});
    CHECK(empty.code == 2);
    CHECK_FALSE(fs::exists(dir / "never"));

    auto first = cli({"--config", cfg, "build"});
    REQUIRE_MESSAGE(first.code == 0, first.err);
    CHECK(first.out.find("#NoSearch") != std::string::npos);
    const auto train1 = slurp(dir / "out" / "train.jsonl");
    const auto sft1 = slurp(dir / "out" / "sft.jsonl");
    auto second = cli({"--config", cfg, "build"});
    REQUIRE(second.code == 0);
    CHECK(first.out == second.out);
    CHECK(slurp(dir / "out" / "train.jsonl") == train1);
    CHECK(slurp(dir / "out" / "sft.jsonl") == sft1);

    auto split = read_dataset(dir / "out");
    CHECK(split.test.size() == 90);
    auto test_pool = load_pool(dir / "test_pool.json");
    for (const auto& s : split.test) CHECK(test_pool.find_by_api(s.gold_call->api_name) != nullptr);

    auto sft = cli({"--config", cfg, "export-sft", "--out", (dir / "again.jsonl").string()});
    REQUIRE(sft.code == 0);
    CHECK(slurp(dir / "again.jsonl") == sft1);
    fs::remove_all(dir);
}

TEST_CASE("eval with scripted backends") {
    auto dir = fixtures::scratch_dir("cli-eval");
    auto pool = fixtures::weather_pool();
    save_pool(pool, dir / "pool.json");
    DatasetSplit split;
    auto add = [&](std::string id, SampleKind kind, std::string q, std::optional<CallCommand> gold) {
        Sample s;
        s.id = std::move(id);
        s.kind = kind;
        s.query = std::move(q);
        s.gold_call = std::move(gold);
        if (kind != SampleKind::NoSearch) s.candidate_tools = {"get_weather", "get_stock", "news_headlines"};
        split.test.push_back(s);
    };
    add("t1", SampleKind::NoSearch, "tell me a joke", std::nullopt);
    add("t2", SampleKind::Call, "weather in Paris", CallCommand{"get_weather", {{"city", std::string("Paris")}}});
    add("t3", SampleKind::NoCall, "book a flight", CallCommand{"book_flight", {}});
    write_dataset(split, dir / "data");
    write_text_file(dir / "right.json", R"js({"rules": [
        {"contains": "API response", "response": "sunny"},
        {"contains": "None of the candidate", "response": "cannot"},
        {"contains": "Query: weather in Paris", "response": "[CALL] get_weather(city=\"Paris\")"},
        {"contains": "Query: book a flight", "response": "[NOCALL]"},
        {"contains": "tell me a joke", "response": "[ANSWER] knock knock"},
        {"contains": "", "response": "[SEARCH]"}]})js");
    write_text_file(dir / "nocall.json", R"js({"rules": [
        {"contains": "Candidate tools", "response": "[NOCALL]"},
        {"contains": "None of the candidate", "response": "fine"},
        {"contains": "", "response": "[SEARCH]"}]})js");

    const std::string pool_arg = "paths.pool=" + (dir / "pool.json").string();
    auto r = cli({"--set", pool_arg, "eval", "--dataset", (dir / "data").string(), "--script", (dir / "right.json").string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto report = parse_json(slurp(dir / "data" / "report" / "report.json"), "report");
    CHECK(report["trials"] == 6);
    for (const auto& [name, m] : report["metrics"].items()) {
        CHECK_MESSAGE(m["mean"] == 1.0, name);
        CHECK(m["std"] == 0.0);
    }

    auto f = cli({"--set", pool_arg, "eval", "--dataset", (dir / "data").string(), "--script",
                  (dir / "nocall.json").string(), "--report", (dir / "r2").string()});
    REQUIRE(f.code == 0);
    auto forced = parse_json(slurp(dir / "r2" / "report.json"), "report");
    CHECK(forced["metrics"]["P_Call"]["mean"] == 0.0);
    CHECK(forced["metrics"]["P_NoCall"]["mean"] == 1.0);
    CHECK(fs::exists(dir / "r2" / "traces.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("demo answers queries line by line") {
    auto dir = fixtures::scratch_dir("cli-demo");
    save_pool(fixtures::weather_pool(), dir / "pool.json");
    write_text_file(dir / "executor.json", R"js({"get_weather": {"binding": "mock", "canned": "{\"city\": \"{city}\", \"temp_c\": 18}"}})js");
    write_text_file(dir / "model.json", R"js({"rules": [
        {"contains": "API response", "response": "It is 18 degrees in Paris."},
        {"contains": "Candidate tools", "response": "[CALL] get_weather(city=\"Paris\")"},
        {"contains": "weather", "response": "[SEARCH]"},
        {"contains": "happy", "response": "[ANSWER] Sleep well, move daily, see friends, be grateful, get outside."},
        {"contains": "", "response": "gibberish"}]})js");
    const std::vector<std::string> base{"--set", "paths.pool=" + (dir / "pool.json").string(), "--set",
                                        "paths.executor=" + (dir / "executor.json").string(), "demo", "--script",
                                        (dir / "model.json").string()};
    auto r = cli(base, "What's the weather in Paris?\nGive me five tips for staying happy\n\nsomething odd\n");
    CHECK(r.code == 0);
    CHECK(r.out.find("branch call") != std::string::npos);
    CHECK(r.out.find("\"temp_c\": 18") == std::string::npos);
    CHECK(r.out.find("=> It is 18 degrees in Paris.") != std::string::npos);
    CHECK(r.out.find("=> Sleep well") != std::string::npos);
    CHECK(r.out.find("branch nosearch") != std::string::npos);
    CHECK(r.err.find("query aborted") != std::string::npos);
    CHECK(cli(base, "").code == 0);
    fs::remove_all(dir);
}
