#pragma once

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "decitool/datagen.hpp"
#include "decitool/registry.hpp"
#include "decitool/rng.hpp"

namespace fixtures {

using namespace decitool;

inline ParamSpec param(std::string name, ParamType type, bool required = true, std::string description = "") {
    ParamSpec p;
    p.name = std::move(name);
    p.type = type;
    p.required = required;
    p.description = std::move(description);
    return p;
}

inline Tool tool(std::string name, std::string description, std::vector<ParamSpec> params,
                 std::string returns = "object") {
    Tool t;
    t.name = name;
    t.description = std::move(description);
    t.function.api_name = std::move(name);
    t.function.parameters = std::move(params);
    t.function.returns = std::move(returns);
    return t;
}

inline ToolPool weather_pool() {
    return ToolPool({
        tool("get_weather", "current weather forecast temperature for a city",
             {param("city", ParamType::String), param("units", ParamType::String, false)}),
        tool("get_stock", "latest stock exchange share price for a ticker symbol",
             {param("symbol", ParamType::String)}),
        tool("translate_text", "translate text between human languages",
             {param("text", ParamType::String), param("target", ParamType::String)}),
        tool("search_recipes", "find cooking recipes by ingredient",
             {param("ingredient", ParamType::String), param("max_results", ParamType::Number, false)}),
        tool("currency_convert", "convert money amounts between currencies",
             {param("amount", ParamType::Number), param("from", ParamType::String), param("to", ParamType::String)}),
        tool("book_flight", "reserve airline flight tickets between airports",
             {param("origin", ParamType::String), param("destination", ParamType::String),
              param("direct", ParamType::Boolean, false)}),
        tool("news_headlines", "top news headlines by topic", {param("topic", ParamType::String)}),
        tool("movie_times", "cinema showtimes for films near a location", {param("location", ParamType::String)}),
    });
}

inline const std::vector<std::vector<std::string>>& topic_words() {
    static const std::vector<std::vector<std::string>> words = {
        {"weather", "forecast", "rain", "temperature"},   {"stock", "market", "share", "ticker"},
        {"music", "song", "playlist", "artist"},          {"movie", "film", "cinema", "actor"},
        {"recipe", "cooking", "ingredient", "kitchen"},   {"flight", "airline", "airport", "ticket"},
        {"hotel", "room", "booking", "stay"},             {"news", "headline", "article", "press"},
        {"translate", "language", "word", "phrase"},      {"map", "route", "distance", "navigation"},
        {"email", "inbox", "message", "send"},            {"calendar", "event", "meeting", "schedule"},
        {"currency", "exchange", "money", "rate"},        {"sport", "score", "team", "match"},
        {"game", "console", "player", "level"},           {"book", "author", "novel", "library"},
        {"health", "doctor", "symptom", "medicine"},      {"fitness", "workout", "exercise", "calorie"},
        {"car", "vehicle", "engine", "dealer"},           {"job", "career", "salary", "resume"},
        {"crypto", "bitcoin", "wallet", "blockchain"},    {"pet", "dog", "cat", "veterinary"},
        {"garden", "plant", "flower", "soil"},            {"shopping", "product", "price", "store"},
        {"photo", "image", "camera", "picture"},          {"video", "stream", "channel", "clip"},
        {"joke", "humor", "funny", "meme"},               {"math", "equation", "number", "calculator"},
        {"space", "planet", "star", "astronomy"},         {"law", "legal", "court", "contract"},
    };
    return words;
}

/// Tools whose descriptions share a topic vocabulary, so hash embeddings
/// cluster by topic. Names are zero-padded "tool_NNNN".
inline ToolPool topic_pool(std::size_t n_tools, std::uint64_t seed = 1) {
    const auto& topics = topic_words();
    Rng rng(seed);
    std::vector<Tool> tools;
    for (std::size_t i = 0; i < n_tools; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "tool_%04zu", i);
        const auto& words = topics[i % topics.size()];
        std::string desc;
        for (std::size_t w = 0; w < 3; ++w) desc += words[rng.uniform_index(words.size())] + " ";
        desc += "service variant" + std::to_string(i);
        tools.push_back(tool(name, desc,
                             {param("query", ParamType::String), param("limit", ParamType::Number, false),
                              param("verbose", ParamType::Boolean, false)}));
    }
    return ToolPool(std::move(tools));
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& label) {
    auto dir = std::filesystem::temp_directory_path() /
               ("decitool-" + label + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
