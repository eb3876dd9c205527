#include <doctest.h>

#include "decitool/call.hpp"
#include "decitool/error.hpp"
#include "decitool/rng.hpp"

using namespace decitool;

namespace {

std::size_t error_offset(std::string_view text) {
    try {
        parse_call(text);
    } catch (const CallSyntaxError& e) {
        return e.position();
    }
    FAIL("expected a syntax error for: " << text);
    return 0;
}

}  // namespace

TEST_CASE("call grammar accepts the documented forms") {
    auto c = parse_call(R"(get_weather(city="Paris", units="metric"))");
    CHECK(c.api_name == "get_weather");
    REQUIRE(c.args.size() == 2);
    CHECK(std::get<std::string>(c.args[0].second) == "Paris");
    CHECK(std::get<std::string>(c.args[1].second) == "metric");

    auto n = parse_call("f( n = 3 , x=-2.5e-3,flag=true, off=false )");
    CHECK(std::get<double>(*n.find("n")) == 3.0);
    CHECK(std::get<double>(*n.find("x")) == doctest::Approx(-2.5e-3));
    CHECK(std::get<bool>(*n.find("flag")));
    CHECK_FALSE(std::get<bool>(*n.find("off")));

    CHECK(parse_call("noop()").args.empty());
    CHECK(parse_call("  noop ( )  ").api_name == "noop");
}

TEST_CASE("string escapes decode") {
    auto c = parse_call(R"(f(s="a\"b\\c\nd\te\u00e9\ud83d\ude00"))");
    CHECK(std::get<std::string>(c.args[0].second) == "a\"b\\c\nd\te\xC3\xA9\xF0\x9F\x98\x80");
}

TEST_CASE("serialization is canonical and round-trips") {
    CallCommand c{"lookup", {{"q", std::string("say \"hi\", (ok)\n\xE2\x82\xAC")}, {"n", 1e21}, {"b", false}}};
    const std::string text = to_string(c);
    CHECK(text == R"(lookup(q="say \"hi\", (ok)\n€", n=1e+21, b=false))");
    CHECK(parse_call(text) == c);
    CHECK(format_number(3.0) == "3");
    CHECK(format_number(-0.5) == "-0.5");
    CHECK(quote_string(std::string("\x01", 1)) == "\"\\u0001\"");
}

TEST_CASE("random valid commands round-trip") {
    Rng rng(7);
    const std::string alphabet = "ab\"\\,()= \n\t\xC3\xA9x9";
    for (int i = 0; i < 500; ++i) {
        CallCommand c;
        c.api_name = "api_" + std::to_string(i);
        const std::size_t n_args = rng.uniform_index(4);
        for (std::size_t a = 0; a < n_args; ++a) {
            const std::string name = "p" + std::to_string(a);
            switch (rng.uniform_index(3)) {
                case 0: {
                    std::string s;
                    for (std::size_t k = rng.uniform_index(8); k > 0; --k) s += alphabet[rng.uniform_index(alphabet.size())];
                    // Keep UTF-8 well formed by never splitting the two-byte letter.
                    std::string clean;
                    for (unsigned char ch : s) {
                        if (ch < 0x80) clean.push_back(static_cast<char>(ch));
                    }
                    c.args.emplace_back(name, clean);
                    break;
                }
                case 1: c.args.emplace_back(name, (rng.uniform_real() - 0.5) * std::pow(10.0, double(rng.uniform_index(40)) - 20)); break;
                default: c.args.emplace_back(name, rng.uniform_index(2) == 1); break;
            }
        }
        const std::string text = to_string(c);
        CHECK(parse_call(text) == c);
        CHECK(to_string(parse_call(text)) == text);
    }
}

TEST_CASE("syntax errors carry the offending offset") {
    CHECK(error_offset("get_weather(city=)") == 17);
    CHECK(error_offset("get_weather(city=\"Paris\"") == 24);
    CHECK(error_offset("(x=1)") == 0);
    CHECK(error_offset("f(x=1, x=2)") == 7);
    CHECK(error_offset("f(x=1) extra") == 7);
    CHECK(error_offset("f(x=-)") == 5);
    CHECK(error_offset("f(x=\"\\q\")") == 5);
    CHECK(error_offset("f(x=tru)") == 4);

    try {
        parse_call("f(x 1)");
        FAIL("no error");
    } catch (const CallSyntaxError& e) {
        CHECK(e.position() == 4);
        CHECK(e.expected() == "'='");
        CHECK(std::string(e.what()) == "call syntax error at offset 4: expected '='");
    }
}

TEST_CASE("same_call ignores argument order") {
    auto a = parse_call(R"(f(a=1, b="x"))");
    auto b = parse_call(R"(f(b="x", a=1))");
    CHECK(same_call(a, b));
    CHECK_FALSE(a == b);
    CHECK_FALSE(same_call(a, parse_call(R"(f(a=2, b="x"))")));
}

TEST_CASE("json conversion") {
    auto c = parse_call(R"(f(a=1.5, b="x", c=true))");
    auto j = to_json(c);
    CHECK(j["api_name"] == "f");
    CHECK(j["args"]["a"] == 1.5);
    CHECK(call_from_json(j) == c);
    CHECK_THROWS_AS(call_from_json(Json{{"api_name", "bad name"}, {"args", Json::object()}}), ParseError);
}
