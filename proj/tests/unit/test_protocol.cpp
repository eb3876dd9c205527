#include <doctest.h>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/protocol.hpp"
#include "support/fixtures.hpp"

using namespace decitool;

TEST_CASE("decision-search parsing") {
    auto a = parse_decision_search("[ANSWER] Five tips are...");
    CHECK_FALSE(a.search);
    CHECK(a.answer == "Five tips are...");
    CHECK(parse_decision_search("  \n[SEARCH]").search);
    CHECK(parse_decision_search("[ANSWER]").answer.empty());
    CHECK_THROWS_AS(parse_decision_search("I think maybe..."), ProtocolViolation);
    CHECK_THROWS_AS(parse_decision_search("[search]"), ProtocolViolation);
    try {
        parse_decision_search("nope");
    } catch (const ProtocolViolation& e) {
        CHECK(e.raw() == "nope");
    }
}

TEST_CASE("decision-call parsing") {
    CHECK_FALSE(parse_decision_call("[NOCALL]").call);
    auto c = parse_decision_call(R"([CALL] get_weather(city="Paris", units="metric"))");
    CHECK(c.call);
    CHECK(c.command == parse_call(R"(get_weather(city="Paris", units="metric"))"));
    try {
        parse_decision_call("[CALL] get_weather(city=)");
        FAIL("expected syntax error");
    } catch (const CallSyntaxError& e) {
        CHECK(e.position() == 24);
    }
    CHECK_THROWS_AS(parse_decision_call("call it"), ProtocolViolation);
}

TEST_CASE("formatters mirror the parsers") {
    CHECK(format_answer("hi") == "[ANSWER] hi");
    CHECK(format_answer("") == "[ANSWER]");
    CHECK(format_search() == "[SEARCH]");
    CHECK(format_nocall() == "[NOCALL]");
    auto call = parse_call(R"(f(a="x"))");
    CHECK(parse_decision_call(format_call(call)).command == call);
}

TEST_CASE("templates render tools and load overrides") {
    auto pool = fixtures::weather_pool();
    auto t = PromptTemplates::defaults();
    std::vector<Tool> tools{pool.at("get_weather")};
    auto msg = call_message(t, "weather in Paris?", tools, true);
    CHECK(msg.role == Role::User);
    CHECK(msg.content.find("get_weather(city: string, units?: string) -> object") != std::string::npos);
    CHECK(msg.content.find("Query: weather in Paris?") != std::string::npos);
    CHECK(call_message(t, "q", tools, false).content.find("signature") == std::string::npos);
    CHECK(render_tools(t, {}, true) == "(no tools available)");
    CHECK(render("{{a}}-{{b}}-{{c}}", {{"a", "1"}, {"b", "2"}}) == "1-2-{{c}}");

    auto dir = fixtures::scratch_dir("templates");
    write_text_file(dir / "nocall.txt", "Answer plainly: {{query}}\n");
    auto loaded = PromptTemplates::load(dir);
    CHECK(loaded.nocall == "Answer plainly: {{query}}");
    CHECK(loaded.call_prompt == t.call_prompt);
    CHECK(nocall_message(loaded, "q", std::nullopt).content == "Answer plainly: q");
    std::filesystem::remove_all(dir);
}
