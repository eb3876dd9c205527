#include <doctest.h>

#include <set>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/registry.hpp"
#include "support/fixtures.hpp"

using namespace decitool;

TEST_CASE("pool validation names the offending tool") {
    auto t = fixtures::tool("dup", "a tool", {});
    CHECK_THROWS_WITH_AS(ToolPool({t, t}), doctest::Contains("dup"), ValidationError);
    auto bad = fixtures::tool("bad", "x", {});
    bad.function.api_name = "not an identifier";
    CHECK_THROWS_AS(ToolPool({bad}), ValidationError);
}

TEST_CASE("lookups") {
    auto pool = fixtures::weather_pool();
    CHECK(pool.size() == 8);
    CHECK(pool.contains("get_weather"));
    CHECK(pool.at("get_stock").function.api_name == "get_stock");
    CHECK(pool.find_by_api("translate_text") != nullptr);
    CHECK(*pool.index_of("get_stock") == 1);
    CHECK_THROWS_AS(pool.at("nope"), UnknownTool);
    CHECK(pool.at("get_weather").function.signature() == "get_weather(city: string, units?: string) -> object");
}

TEST_CASE("validate_call") {
    auto pool = fixtures::weather_pool();
    const auto& spec = pool.at("get_weather").function;
    CHECK_NOTHROW(validate_call(parse_call(R"(get_weather(city="Paris"))"), spec));
    CHECK_THROWS_WITH_AS(validate_call(parse_call(R"(get_weather(units="metric"))"), spec),
                         doctest::Contains("city"), MissingRequiredParam);
    CHECK_THROWS_AS(validate_call(parse_call(R"(get_weather(city=3))"), spec), InvalidCallArgument);
    CHECK_THROWS_AS(validate_call(parse_call(R"(get_weather(city="a", zip="1"))"), spec), InvalidCallArgument);
    CHECK_THROWS_AS(validate_call(parse_call(R"(other(city="a"))"), spec), InvalidCallArgument);
}

TEST_CASE("json round trip and file errors") {
    auto pool = fixtures::weather_pool();
    CHECK(pool_from_json(to_json(pool)) == pool);

    auto dir = fixtures::scratch_dir("registry");
    save_pool(pool, dir / "pool.json");
    CHECK(load_pool(dir / "pool.json") == pool);
    CHECK_THROWS_WITH_AS(load_pool(dir / "missing.json"), doctest::Contains("missing.json"), IoError);

    write_text_file(dir / "broken.json", "[{\"name\": \"x\", \"description\": \"d\", \"function\": "
                                         "{\"parameters\": [{\"name\": \"p\", \"type\": \"int\"}]}}]");
    CHECK_THROWS_WITH(load_pool(dir / "broken.json"), doctest::Contains("tool 'x'"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("split_pool is seeded, disjoint and order preserving") {
    auto pool = fixtures::topic_pool(50);
    auto [a, b] = split_pool(pool, 40, 9);
    CHECK(a.size() == 40);
    CHECK(b.size() == 10);
    std::set<std::string> seen;
    for (const auto& t : a.tools()) seen.insert(t.name);
    for (const auto& t : b.tools()) CHECK(seen.insert(t.name).second);
    CHECK(seen.size() == 50);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(*pool.index_of(a.tools()[i - 1].name) < *pool.index_of(a.tools()[i].name));
    auto [a2, b2] = split_pool(pool, 40, 9);
    CHECK(a2 == a);
    CHECK(b2 == b);
    CHECK_THROWS_AS(split_pool(pool, 0, 1), RangeError);
    CHECK_THROWS_AS(split_pool(pool, 50, 1), RangeError);
}
