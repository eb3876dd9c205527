#include "decitool/config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "decitool/error.hpp"
#include "decitool/io.hpp"

namespace decitool {

namespace {

using Values = std::vector<std::string>;
using Setter = std::function<void(Config&, const Values&)>;

const std::string& single(std::string_view key, const Values& v) {
    if (v.size() != 1) throw ConfigError(std::string(key) + ": expected a single value");
    return v.front();
}

template <typename T>
T parse_integer(std::string_view key, const std::string& text) {
    T out{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(std::string(key) + ": '" + text + "' is not a non-negative integer");
    }
    return out;
}

double parse_real(std::string_view key, const std::string& text) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(std::string(key) + ": '" + text + "' is not a number");
    }
    return out;
}

bool parse_bool(std::string_view key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(std::string(key) + ": '" + text + "' is not a boolean");
}

template <typename T>
Setter integer(T Config::*field) {
    return [field](Config& c, const Values& v) { c.*field = parse_integer<T>("value", single("value", v)); };
}

Setter path(std::filesystem::path Config::*field) {
    return [field](Config& c, const Values& v) { c.*field = single("value", v); };
}

void backend_setters(std::map<std::string, Setter>& t, const std::string& section, BackendSettings Config::*b) {
    t[section + ".kind"] = [b](Config& c, const Values& v) {
        const auto& s = single("kind", v);
        if (s != "scripted" && s != "remote") throw ConfigError(s + ": backend kind must be 'scripted' or 'remote'");
        (c.*b).kind = s;
    };
    t[section + ".script"] = [b](Config& c, const Values& v) { (c.*b).script = single("script", v); };
    t[section + ".endpoint"] = [b](Config& c, const Values& v) { (c.*b).endpoint = single("endpoint", v); };
    t[section + ".model"] = [b](Config& c, const Values& v) { (c.*b).model = single("model", v); };
    t[section + ".temperature"] = [b](Config& c, const Values& v) {
        (c.*b).temperature = parse_real("temperature", single("temperature", v));
    };
    t[section + ".timeout"] = [b](Config& c, const Values& v) {
        (c.*b).timeout_s = parse_real("timeout", single("timeout", v));
    };
    t[section + ".max_retries"] = [b](Config& c, const Values& v) {
        (c.*b).max_retries = parse_integer<int>("max_retries", single("max_retries", v));
    };
    t[section + ".system_prompt"] = [b](Config& c, const Values& v) {
        (c.*b).system_prompt = parse_bool("system_prompt", single("system_prompt", v));
    };
}

// Insertion order matters for config_keys(), so keep a parallel list.
struct Table {
    std::map<std::string, Setter> setters;
    std::vector<std::string> order;
};

const Table& table() {
    static const Table t = [] {
        std::map<std::string, Setter> s;
        s["seed"] = integer(&Config::seed);
        s["parallel"] = integer(&Config::parallel);

        s["paths.pool"] = path(&Config::pool);
        s["paths.pool_train"] = path(&Config::pool_train);
        s["paths.pool_test"] = path(&Config::pool_test);
        s["paths.clusters"] = path(&Config::clusters);
        s["paths.dataset"] = path(&Config::dataset_dir);
        s["paths.pairs"] = path(&Config::pairs);
        s["paths.test_pairs"] = path(&Config::test_pairs);
        s["paths.nosearch_queries"] = path(&Config::nosearch_queries);
        s["paths.executor"] = path(&Config::executor_registry);
        s["paths.templates"] = path(&Config::templates_dir);
        s["paths.sft"] = path(&Config::sft);
        s["paths.report"] = path(&Config::report_dir);

        s["embedding.provider"] = [](Config& c, const Values& v) {
            const auto& p = single("embedding.provider", v);
            if (p != "hash" && p != "remote") throw ConfigError("embedding.provider must be 'hash' or 'remote'");
            c.embedding_provider = p;
        };
        s["embedding.dim"] = integer(&Config::embedding_dim);
        s["embedding.endpoint"] = [](Config& c, const Values& v) {
            c.embedding_endpoint = single("embedding.endpoint", v);
        };

        s["clustering.m"] = integer(&Config::m);
        s["clustering.max_iter"] = integer(&Config::max_iter);
        s["clustering.tol"] = [](Config& c, const Values& v) {
            c.tol = parse_real("clustering.tol", single("clustering.tol", v));
        };

        s["sampler.k"] = [](Config& c, const Values& v) {
            c.sampler.k = parse_integer<std::size_t>("sampler.k", single("sampler.k", v));
        };
        s["sampler.mode"] = [](Config& c, const Values& v) {
            c.sampler.mode = strategy_from_string(single("sampler.mode", v));
        };
        s["sampler.weights"] = [](Config& c, const Values& v) {
            if (v.size() != 3) throw ConfigError("sampler.weights: expected [random, intra, inter]");
            for (std::size_t i = 0; i < 3; ++i) {
                c.sampler.mixture_weights[i] = parse_integer<unsigned>("sampler.weights", v[i]);
            }
        };
        s["sampler.seed"] = integer(&Config::seed);

        s["dataset.train_tools"] = integer(&Config::train_tools);
        s["dataset.pairs_per_tool"] = integer(&Config::pairs_per_tool);
        s["dataset.call"] = [](Config& c, const Values& v) {
            c.call_proportion = parse_real("dataset.call", single("dataset.call", v));
        };
        s["dataset.nocall"] = [](Config& c, const Values& v) {
            c.nocall_proportion = parse_real("dataset.nocall", single("dataset.nocall", v));
        };
        s["dataset.valid_fraction"] = [](Config& c, const Values& v) {
            c.valid_fraction = parse_real("dataset.valid_fraction", single("dataset.valid_fraction", v));
        };
        s["dataset.valid_counts"] = [](Config& c, const Values& v) {
            if (v.size() != 3) throw ConfigError("dataset.valid_counts: expected [nosearch, nocall, call]");
            std::array<std::size_t, 3> counts{};
            for (std::size_t i = 0; i < 3; ++i) counts[i] = parse_integer<std::size_t>("dataset.valid_counts", v[i]);
            c.valid_counts = counts;
        };

        backend_setters(s, "model", &Config::model);
        backend_setters(s, "generator", &Config::generator);
        backend_setters(s, "checker", &Config::checker);

        s["eval.trials"] = integer(&Config::trials);
        s["eval.policy"] = [](Config& c, const Values& v) { c.policy = policy_from_string(single("eval.policy", v)); };
        s["eval.split"] = [](Config& c, const Values& v) {
            const auto& sp = single("eval.split", v);
            if (sp != "train" && sp != "valid" && sp != "test") throw ConfigError("eval.split must be train, valid or test");
            c.eval_split = sp;
        };
        s["eval.include_signatures"] = [](Config& c, const Values& v) {
            c.include_signatures = parse_bool("eval.include_signatures", single("eval.include_signatures", v));
        };
        s["eval.max_reprompts"] = integer(&Config::max_reprompts);
        s["eval.max_rounds"] = integer(&Config::max_rounds);
        s["eval.byte_limit"] = integer(&Config::byte_limit);

        Table out;
        for (const auto& [k, _] : s) out.order.push_back(k);
        out.setters = std::move(s);
        return out;
    }();
    return t;
}

}  // namespace

std::filesystem::path Config::resolve(const std::filesystem::path& p) const {
    if (p.empty() || p.is_absolute()) return p;
    return base_dir / p;
}

void Config::validate() const {
    if (sampler.k == 0) throw ConfigError("sampler.k must be at least 1");
    if (trials == 0) throw ConfigError("eval.trials must be at least 1");
    if (m == 0) throw ConfigError("clustering.m must be at least 1");
    if (embedding_dim == 0) throw ConfigError("embedding.dim must be at least 1");
    if (max_reprompts < 0) throw ConfigError("eval.max_reprompts must be non-negative");
    if (max_rounds < 1) throw ConfigError("eval.max_rounds must be at least 1");
    if (call_proportion < 0 || nocall_proportion < 0 || std::abs(call_proportion + nocall_proportion - 1.0) > 1e-9) {
        throw ConfigError("dataset.call and dataset.nocall must be non-negative and sum to 1");
    }
    if (valid_fraction < 0 || valid_fraction > 1) throw ConfigError("dataset.valid_fraction must lie in [0, 1]");
    sampler.validate();
}

void apply_setting(Config& cfg, std::string_view key, const std::vector<std::string>& values) {
    const auto& t = table();
    auto it = t.setters.find(std::string(key));
    if (it == t.setters.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
    try {
        it->second(cfg, values);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
}

void apply_setting(Config& cfg, std::string_view key, std::string_view value) {
    std::string v(value);
    // Inline arrays on the command line: "[2, 1, 2]" or "2,1,2".
    if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<std::string> parts;
    if (v.find(',') != std::string::npos) {
        std::stringstream ss(v);
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(CLI::detail::trim_copy(part));
    } else {
        parts.push_back(CLI::detail::trim_copy(v));
    }
    apply_setting(cfg, key, parts);
}

Config parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    Config cfg;
    cfg.base_dir = base_dir;
    std::istringstream in{std::string(text)};
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    for (const auto& item : items) {
        // Section open/close markers.
        if (item.name == "++" || item.name == "--") continue;
        apply_setting(cfg, item.fullname(), item.inputs);
    }
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return parse_config(text, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::vector<std::string> config_keys() { return table().order; }

std::unique_ptr<ModelBackend> make_backend(const BackendSettings& s, const Config& cfg, std::string_view role) {
    if (s.kind == "scripted") {
        if (s.script.empty()) throw ConfigError(std::string(role) + ".script is required for a scripted backend");
        return std::make_unique<ScriptedBackend>(ScriptedBackend::load(cfg.resolve(s.script)));
    }
    if (s.kind == "remote") {
        if (s.endpoint.empty()) throw ConfigError(std::string(role) + ".endpoint is required for a remote backend");
        RemoteChatConfig rc;
        rc.endpoint = s.endpoint;
        rc.model = s.model;
        rc.temperature = s.temperature;
        rc.system_prompt = s.system_prompt;
        if (const char* key = std::getenv("MODEL_API_KEY")) rc.api_key = key;
        rc.http.read_timeout = std::chrono::milliseconds(static_cast<long>(s.timeout_s * 1000.0));
        rc.http.retry.max_retries = s.max_retries;
        return std::make_unique<RemoteChatBackend>(std::move(rc));
    }
    throw ConfigError("no " + std::string(role) + " backend configured (set " + std::string(role) + ".kind)");
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const Config& cfg) {
    if (cfg.embedding_provider == "remote") {
        if (cfg.embedding_endpoint.empty()) throw ConfigError("embedding.endpoint is required for a remote provider");
        RemoteEmbeddingConfig rc;
        rc.endpoint = cfg.embedding_endpoint;
        rc.dim = cfg.embedding_dim;
        if (const char* key = std::getenv("EMBED_API_KEY")) rc.api_key = key;
        return std::make_unique<RemoteEmbeddingProvider>(std::move(rc));
    }
    return std::make_unique<HashEmbeddingProvider>(cfg.embedding_dim);
}

}  // namespace decitool
