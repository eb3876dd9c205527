#include "decitool/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "decitool/error.hpp"
#include "decitool/io.hpp"
#include "decitool/rng.hpp"

namespace decitool {

namespace {

// Pulls the outermost JSON array out of a model reply, tolerating code
// fences and surrounding prose.
std::optional<Json> extract_json_array(std::string_view text) {
    const auto open = text.find('[');
    const auto close = text.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    std::string_view body = text.substr(open, close - open + 1);
    try {
        Json j = Json::parse(body.begin(), body.end());
        if (j.is_array()) return j;
    } catch (const Json::parse_error&) {
    }
    return std::nullopt;
}

std::map<std::string, std::string> tool_vars(const Tool& tool) {
    return {{"tool_name", tool.name},
            {"tool_description", tool.description},
            {"function_signature", tool.function.signature()},
            {"api_name", tool.function.api_name}};
}

}  // namespace

GenerationResult generate_pairs(const Tool& tool, ModelBackend& generator, std::size_t n_pairs,
                                const PromptTemplates& templates) {
    if (n_pairs == 0) throw InvalidArgument("generate_pairs: n_pairs must be at least 1");
    auto vars = tool_vars(tool);
    vars["n_pairs"] = std::to_string(n_pairs);
    const std::vector<Message> messages{{Role::User, render(templates.generation, vars)}};
    const std::string reply = complete(generator, messages);

    auto arr = extract_json_array(reply);
    if (!arr) throw AllMalformed("generator reply for '" + tool.name + "' contains no JSON array");

    GenerationResult out;
    for (const auto& entry : *arr) {
        if (out.pairs.size() >= n_pairs) break;
        try {
            if (!entry.is_object() || !entry.contains("query") || !entry["query"].is_string() ||
                entry["query"].get<std::string>().empty() || !entry.contains("call")) {
                throw ParseError("entry shape");
            }
            CallCommand call = call_from_json(entry["call"]);
            validate_call(call, tool.function);
            out.pairs.push_back({tool.name, entry["query"].get<std::string>(), std::move(call)});
        } catch (const Error&) {
            ++out.malformed;
        }
    }
    if (out.pairs.empty()) {
        throw AllMalformed("generator reply for '" + tool.name + "' has no well-formed pairs (" +
                           std::to_string(out.malformed) + " malformed)");
    }
    return out;
}

std::vector<QueryCallPair> check_pairs(std::span<const QueryCallPair> pairs, ModelBackend& checker,
                                       const ToolPool& pool, const PromptTemplates& templates) {
    std::vector<QueryCallPair> kept;
    std::size_t i = 0;
    while (i < pairs.size()) {
        std::size_t j = i;
        while (j < pairs.size() && pairs[j].tool_name == pairs[i].tool_name) ++j;
        const Tool& tool = pool.at(pairs[i].tool_name);

        std::string listing;
        for (std::size_t p = i; p < j; ++p) {
            if (p > i) listing += "\n";
            listing += std::to_string(p - i + 1) + ". Query: " + pairs[p].query + "\n   Call: " + to_string(pairs[p].call);
        }
        auto vars = tool_vars(tool);
        vars["pairs"] = listing;
        vars["count"] = std::to_string(j - i);
        const std::vector<Message> messages{{Role::User, render(templates.checking, vars)}};
        const std::string reply = complete(checker, messages);

        auto arr = extract_json_array(reply);
        if (!arr || arr->size() != j - i) {
            throw BackendError("checker reply for '" + tool.name + "' is not a JSON array of " +
                               std::to_string(j - i) + " booleans");
        }
        for (std::size_t p = i; p < j; ++p) {
            const Json& verdict = (*arr)[p - i];
            if (!verdict.is_boolean()) throw BackendError("checker reply for '" + tool.name + "' has a non-boolean");
            if (verdict.get<bool>()) kept.push_back(pairs[p]);
        }
        i = j;
    }
    return kept;
}

GenerationReport run_generation(const ToolPool& pool, ModelBackend& generator, ModelBackend& checker,
                                std::size_t n_pairs, const PromptTemplates& templates, std::size_t parallel) {
    struct Slot {
        std::vector<QueryCallPair> kept;
        std::size_t generated = 0, malformed = 0, rejected = 0;
        bool failed = false;
        std::exception_ptr error;
    };
    const auto& tools = pool.tools();
    std::vector<Slot> slots(tools.size());
    auto work = [&](std::size_t idx) {
        Slot& s = slots[idx];
        try {
            GenerationResult gen = generate_pairs(tools[idx], generator, n_pairs, templates);
            s.generated = gen.pairs.size() + gen.malformed;
            s.malformed = gen.malformed;
            s.kept = check_pairs(gen.pairs, checker, pool, templates);
            s.rejected = gen.pairs.size() - s.kept.size();
        } catch (const AllMalformed&) {
            s.failed = true;
        } catch (...) {
            s.error = std::current_exception();
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, parallel);
    if (threads == 1) {
        for (std::size_t i = 0; i < tools.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < tools.size(); i = next++) work(i);
            });
        }
        for (auto& w : workers) w.join();
    }

    GenerationReport report;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        Slot& s = slots[i];
        if (s.error) std::rethrow_exception(s.error);
        report.generated += s.generated;
        report.malformed += s.malformed;
        report.rejected += s.rejected;
        if (s.failed) report.failed_tools.push_back(tools[i].name);
        if (!s.kept.empty()) report.pairs[tools[i].name] = std::move(s.kept);
    }
    return report;
}

std::string_view to_string(SampleKind kind) {
    switch (kind) {
        case SampleKind::NoSearch: return "nosearch";
        case SampleKind::NoCall: return "nocall";
        case SampleKind::Call: return "call";
    }
    return "nosearch";
}

SampleKind sample_kind_from_string(std::string_view text) {
    if (text == "nosearch") return SampleKind::NoSearch;
    if (text == "nocall") return SampleKind::NoCall;
    if (text == "call") return SampleKind::Call;
    throw ParseError("unknown sample kind '" + std::string(text) + "'");
}

void validate_sample(const Sample& s, const ToolPool* pool) {
    const std::string who = "sample '" + s.id + "'";
    switch (s.kind) {
        case SampleKind::NoSearch:
            if (!s.candidate_tools.empty()) throw ValidationError(who + ": NoSearch sample has candidate tools");
            if (s.gold_call) throw ValidationError(who + ": NoSearch sample has a gold call");
            break;
        case SampleKind::Call: {
            if (!s.gold_call) throw ValidationError(who + ": Call sample without gold call");
            bool found = false;
            for (const auto& name : s.candidate_tools) {
                const Tool* t = pool ? pool->find(name) : nullptr;
                const std::string& api = t ? t->function.api_name : name;
                if (api == s.gold_call->api_name) found = true;
            }
            if (!found) throw ValidationError(who + ": gold tool missing from candidate tools");
            break;
        }
        case SampleKind::NoCall:
            if (s.gold_call) {
                for (const auto& name : s.candidate_tools) {
                    const Tool* t = pool ? pool->find(name) : nullptr;
                    const std::string& api = t ? t->function.api_name : name;
                    if (api == s.gold_call->api_name) {
                        throw ValidationError(who + ": NoCall sample lists its gold tool");
                    }
                }
            }
            break;
    }
    std::vector<std::string> names = s.candidate_tools;
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw ValidationError(who + ": duplicate candidate tools");
    }
}

std::vector<Sample> make_search_samples(const ToolPool& pool, const ClusterModel& clusters, const PairsByTool& pairs,
                                        const SamplerConfig& sampler, const Proportions& proportions,
                                        std::uint64_t seed, std::string_view id_prefix) {
    sampler.validate();
    std::vector<const QueryCallPair*> flat;
    for (const auto& tool : pool.tools()) {
        auto it = pairs.find(tool.name);
        if (it == pairs.end()) continue;
        for (const auto& p : it->second) flat.push_back(&p);
    }
    for (const auto& [name, list] : pairs) {
        if (!pool.contains(name) && !list.empty()) {
            throw ValidationError("pairs reference tool '" + name + "' which is not in the pool");
        }
    }

    Rng order_rng(derive_seed(seed, "assign"));
    order_rng.shuffle(flat);
    const auto n = flat.size();
    const auto n_call = static_cast<std::size_t>(std::floor(proportions.call * static_cast<double>(n) + 1e-9));
    const std::uint64_t draw_base = derive_seed(seed, "candidates");

    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const QueryCallPair& pair = *flat[i];
        const bool is_call = i < n_call;
        Sample s;
        std::ostringstream id;
        id << id_prefix << "-" << std::setw(6) << std::setfill('0') << i;
        s.id = id.str();
        s.kind = is_call ? SampleKind::Call : SampleKind::NoCall;
        s.query = pair.query;
        s.gold_call = pair.call;
        s.metadata.seed = derive_seed(draw_base, i);
        Rng rng(s.metadata.seed);
        const GoldSpec gold = is_call ? GoldSpec::included(pair.tool_name) : GoldSpec::excluded(pair.tool_name);
        CandidateToolset cands = sample_candidates(pool, clusters, sampler, gold, rng);
        s.candidate_tools = cands.names();
        s.metadata.strategy = std::string(to_string(cands.strategy_used));
        s.metadata.fallback = cands.fallback;
        if (clusters.contains(pair.tool_name)) s.metadata.cluster = clusters.cluster_of(pair.tool_name);
        out.push_back(std::move(s));
    }
    return out;
}

DatasetSplit assemble_dataset(const ToolPool& pool_train, const ClusterModel& clusters, const PairsByTool& train_pairs,
                              const std::vector<std::string>& nosearch_queries, const AssemblyOptions& options,
                              const ToolPool* pool_test, const PairsByTool* test_pairs) {
    const Proportions& p = options.proportions;
    if (p.call < 0.0 || p.nocall < 0.0 || std::abs(p.call + p.nocall - 1.0) > 1e-9) {
        throw InvalidArgument("call and nocall proportions must be non-negative and sum to 1");
    }
    if (nosearch_queries.empty()) throw InvalidArgument("at least one NoSearch query is required");
    if (options.valid_fraction < 0.0 || options.valid_fraction > 1.0) {
        throw InvalidArgument("valid_fraction must lie in [0, 1]");
    }

    std::vector<Sample> all;
    const std::uint64_t ns_base = derive_seed(options.seed, "nosearch");
    for (std::size_t i = 0; i < nosearch_queries.size(); ++i) {
        Sample s;
        std::ostringstream id;
        id << "nosearch-" << std::setw(6) << std::setfill('0') << i;
        s.id = id.str();
        s.kind = SampleKind::NoSearch;
        s.query = nosearch_queries[i];
        s.metadata.seed = derive_seed(ns_base, i);
        all.push_back(std::move(s));
    }
    auto search = make_search_samples(pool_train, clusters, train_pairs, options.sampler, p, options.seed, "search");
    all.insert(all.end(), std::make_move_iterator(search.begin()), std::make_move_iterator(search.end()));

    std::vector<bool> is_valid(all.size(), false);
    Rng split_rng(derive_seed(options.seed, "split"));
    if (options.valid_counts) {
        const SampleKind kinds[3] = {SampleKind::NoSearch, SampleKind::NoCall, SampleKind::Call};
        for (int k = 0; k < 3; ++k) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < all.size(); ++i) {
                if (all[i].kind == kinds[k]) idx.push_back(i);
            }
            const std::size_t want = (*options.valid_counts)[k];
            if (want > idx.size()) {
                throw RangeError("valid count " + std::to_string(want) + " for " + std::string(to_string(kinds[k])) +
                                 " exceeds the " + std::to_string(idx.size()) + " samples available");
            }
            for (std::size_t j : split_rng.choose(idx.size(), want)) is_valid[idx[j]] = true;
        }
    } else {
        const auto want =
            static_cast<std::size_t>(std::llround(options.valid_fraction * static_cast<double>(all.size())));
        for (std::size_t j : split_rng.choose(all.size(), want)) is_valid[j] = true;
    }

    DatasetSplit split;
    for (std::size_t i = 0; i < all.size(); ++i) (is_valid[i] ? split.valid : split.train).push_back(std::move(all[i]));

    if (pool_test && test_pairs) {
        split.test = make_search_samples(*pool_test, clusters, *test_pairs, options.sampler, p,
                                         derive_seed(options.seed, "test"), "test");
    }
    return split;
}

namespace {

KindCounts count(const std::vector<Sample>& samples) {
    KindCounts c;
    for (const auto& s : samples) {
        switch (s.kind) {
            case SampleKind::NoSearch: ++c.nosearch; break;
            case SampleKind::NoCall: ++c.nocall; break;
            case SampleKind::Call: ++c.call; break;
        }
    }
    return c;
}

}  // namespace

DatasetStats compute_stats(const DatasetSplit& split) {
    return {count(split.train), count(split.valid), count(split.test)};
}

std::string format_stats(const DatasetStats& stats) {
    std::ostringstream out;
    auto cell = [&](std::size_t v) {
        out << std::setw(11) << (v == 0 ? std::string("-") : std::to_string(v));
    };
    out << "Dataset statistics\n";
    out << std::left << std::setw(6) << "split" << std::right << std::setw(11) << "#NoSearch" << std::setw(11)
        << "#NoCall" << std::setw(11) << "#Call" << std::setw(11) << "#Total" << "\n";
    const std::pair<const char*, const KindCounts*> rows[] = {
        {"Train", &stats.train}, {"Valid", &stats.valid}, {"Test", &stats.test}};
    for (const auto& [name, c] : rows) {
        out << std::left << std::setw(6) << name << std::right;
        cell(c->nosearch);
        cell(c->nocall);
        cell(c->call);
        cell(c->total());
        out << "\n";
    }
    return out.str();
}

Json to_json(const Sample& s) {
    return Json{{"id", s.id},
                {"kind", to_string(s.kind)},
                {"query", s.query},
                {"candidate_tools", s.candidate_tools},
                {"gold_call", s.gold_call ? to_json(*s.gold_call) : Json(nullptr)},
                {"metadata",
                 {{"strategy", s.metadata.strategy},
                  {"seed", s.metadata.seed},
                  {"fallback", s.metadata.fallback},
                  {"cluster", s.metadata.cluster ? Json(*s.metadata.cluster) : Json(nullptr)}}}};
}

Sample sample_from_json(const Json& j) {
    try {
        Sample s;
        s.id = j.at("id").get<std::string>();
        s.kind = sample_kind_from_string(j.at("kind").get<std::string>());
        s.query = j.at("query").get<std::string>();
        s.candidate_tools = j.at("candidate_tools").get<std::vector<std::string>>();
        if (j.contains("gold_call") && !j["gold_call"].is_null()) s.gold_call = call_from_json(j["gold_call"]);
        if (j.contains("metadata") && j["metadata"].is_object()) {
            const Json& m = j["metadata"];
            s.metadata.strategy = m.value("strategy", std::string("none"));
            s.metadata.seed = m.value("seed", std::uint64_t{0});
            s.metadata.fallback = m.value("fallback", false);
            if (m.contains("cluster") && !m["cluster"].is_null()) s.metadata.cluster = m["cluster"].get<std::size_t>();
        }
        return s;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("sample: ") + e.what());
    }
}

Json to_json(const QueryCallPair& pair) {
    return Json{{"tool", pair.tool_name}, {"query", pair.query}, {"call", to_json(pair.call)}};
}

QueryCallPair pair_from_json(const Json& j) {
    try {
        return {j.at("tool").get<std::string>(), j.at("query").get<std::string>(), call_from_json(j.at("call"))};
    } catch (const Json::exception& e) {
        throw ParseError(std::string("query-call pair: ") + e.what());
    }
}

void write_dataset(const DatasetSplit& split, const std::filesystem::path& dir) {
    auto write = [&](const std::vector<Sample>& samples, const char* name) {
        std::vector<Json> rows;
        rows.reserve(samples.size());
        for (const auto& s : samples) rows.push_back(to_json(s));
        write_text_file(dir / name, to_jsonl(rows));
    };
    write(split.train, "train.jsonl");
    write(split.valid, "valid.jsonl");
    write(split.test, "test.jsonl");
}

std::vector<Sample> read_samples(const std::filesystem::path& path) {
    std::vector<Sample> out;
    for (const auto& row : read_jsonl(path)) out.push_back(sample_from_json(row));
    return out;
}

DatasetSplit read_dataset(const std::filesystem::path& dir) {
    DatasetSplit split;
    split.train = read_samples(dir / "train.jsonl");
    split.valid = read_samples(dir / "valid.jsonl");
    if (std::filesystem::exists(dir / "test.jsonl")) split.test = read_samples(dir / "test.jsonl");
    return split;
}

void write_pairs(const ToolPool& pool, const PairsByTool& pairs, const std::filesystem::path& path) {
    std::vector<Json> rows;
    for (const auto& tool : pool.tools()) {
        auto it = pairs.find(tool.name);
        if (it == pairs.end()) continue;
        for (const auto& p : it->second) rows.push_back(to_json(p));
    }
    write_text_file(path, to_jsonl(rows));
}

PairsByTool read_pairs(const std::filesystem::path& path) {
    PairsByTool out;
    for (const auto& row : read_jsonl(path)) {
        QueryCallPair p = pair_from_json(row);
        out[p.tool_name].push_back(std::move(p));
    }
    return out;
}

std::vector<std::string> read_queries(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line.front() == '{') {
            Json j = parse_json(line, path.string() + ":" + std::to_string(line_no));
            if (j.contains("query") && j["query"].is_string()) {
                out.push_back(j["query"].get<std::string>());
            } else if (j.contains("instruction") && j["instruction"].is_string()) {
                out.push_back(j["instruction"].get<std::string>());
            } else {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": record has no 'query' field");
            }
        } else {
            out.push_back(line);
        }
    }
    return out;
}

std::vector<Message> sft_messages(const Sample& sample, const ToolPool& pool, const PromptTemplates& templates,
                                  bool include_signatures) {
    std::vector<Message> msgs = search_messages(templates, sample.query);
    if (sample.kind == SampleKind::NoSearch) {
        msgs.push_back({Role::Assistant, format_answer("")});
        return msgs;
    }
    msgs.push_back({Role::Assistant, format_search()});
    std::vector<Tool> tools;
    for (const auto& name : sample.candidate_tools) tools.push_back(pool.at(name));
    msgs.push_back(call_message(templates, sample.query, tools, include_signatures));
    if (sample.kind == SampleKind::Call) {
        msgs.push_back({Role::Assistant, format_call(*sample.gold_call)});
    } else {
        msgs.push_back({Role::Assistant, format_nocall()});
    }
    return msgs;
}

void export_sft(const DatasetSplit& split, const ToolPool& pool, const PromptTemplates& templates,
                const std::filesystem::path& path, bool include_signatures) {
    std::vector<Json> rows;
    auto add = [&](const std::vector<Sample>& samples, const char* name) {
        for (const auto& s : samples) {
            Json msgs = Json::array();
            for (const auto& m : sft_messages(s, pool, templates, include_signatures)) {
                msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
            }
            rows.push_back({{"messages", std::move(msgs)}, {"meta", {{"split", name}, {"sample", to_json(s)}}}});
        }
    };
    add(split.train, "train");
    add(split.valid, "valid");
    add(split.test, "test");
    write_text_file(path, to_jsonl(rows));
}

DatasetSplit import_sft(const std::filesystem::path& path) {
    DatasetSplit split;
    std::size_t line = 0;
    for (const auto& row : read_jsonl(path)) {
        ++line;
        const std::string where = path.string() + ": record " + std::to_string(line);
        try {
            Sample s = sample_from_json(row.at("meta").at("sample"));
            const std::string which = row.at("meta").at("split").get<std::string>();
            std::vector<Message> msgs;
            for (const auto& m : row.at("messages")) {
                msgs.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
            }
            // The turns must encode the same decision as the sample.
            if (msgs.size() < 3 || msgs[1].role != Role::User || msgs[1].content != s.query) {
                throw ParseError(where + ": user turn does not match the sample query");
            }
            const std::string& first = msgs[2].content;
            if (s.kind == SampleKind::NoSearch) {
                if (msgs.size() != 3 || parse_decision_search(first).search) {
                    throw ParseError(where + ": NoSearch sample must end with a direct answer");
                }
            } else {
                if (msgs.size() != 5 || !parse_decision_search(first).search) {
                    throw ParseError(where + ": search sample must open with [SEARCH]");
                }
                CallDecision d = parse_decision_call(msgs[4].content);
                if (d.call != (s.kind == SampleKind::Call) || (d.call && !(d.command == *s.gold_call))) {
                    throw ParseError(where + ": Decision-Call turn disagrees with the sample");
                }
            }
            if (which == "train") {
                split.train.push_back(std::move(s));
            } else if (which == "valid") {
                split.valid.push_back(std::move(s));
            } else if (which == "test") {
                split.test.push_back(std::move(s));
            } else {
                throw ParseError(where + ": unknown split '" + which + "'");
            }
        } catch (const Json::exception& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const ProtocolViolation& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const CallSyntaxError& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return split;
}

}  // namespace decitool
