#include "decitool/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "decitool/datagen.hpp"
#include "decitool/error.hpp"
#include "decitool/eval.hpp"
#include "decitool/executor.hpp"
#include "decitool/io.hpp"
#include "decitool/runtime.hpp"

namespace decitool {

namespace fs = std::filesystem;

namespace {

fs::path require_path(const Config& cfg, const fs::path& p, std::string_view key) {
    if (p.empty()) throw ConfigError(std::string(key) + " is not set");
    return cfg.resolve(p);
}

fs::path require_existing(const Config& cfg, const fs::path& p, std::string_view key) {
    fs::path full = require_path(cfg, p, key);
    if (!fs::exists(full)) throw IoError("cannot open " + full.string() + " (" + std::string(key) + ")");
    return full;
}

ToolPool train_pool(const Config& cfg) {
    if (!cfg.pool_train.empty()) return load_pool(require_existing(cfg, cfg.pool_train, "paths.pool_train"));
    return load_pool(require_existing(cfg, cfg.pool, "paths.pool"));
}

std::optional<ToolPool> test_pool(const Config& cfg) {
    if (cfg.pool_test.empty()) return std::nullopt;
    return load_pool(require_existing(cfg, cfg.pool_test, "paths.pool_test"));
}

ToolPool merge_pools(const ToolPool& a, const ToolPool* b) {
    std::vector<Tool> tools = a.tools();
    if (b) tools.insert(tools.end(), b->tools().begin(), b->tools().end());
    return ToolPool(std::move(tools));
}

/// The pool holding every tool a dataset may mention.
ToolPool full_pool(const Config& cfg) {
    if (!cfg.pool.empty()) return load_pool(require_existing(cfg, cfg.pool, "paths.pool"));
    ToolPool train = train_pool(cfg);
    auto test = test_pool(cfg);
    return merge_pools(train, test ? &*test : nullptr);
}

PromptTemplates templates_for(const Config& cfg) {
    if (cfg.templates_dir.empty()) return PromptTemplates::defaults();
    return PromptTemplates::load(require_existing(cfg, cfg.templates_dir, "paths.templates"));
}

ApiExecutor executor_for(const Config& cfg, const ToolPool& pool) {
    ExecutorOptions opts;
    opts.byte_limit = cfg.byte_limit;
    ApiExecutor exec = cfg.executor_registry.empty()
                           ? ApiExecutor::mock_all(pool, "{}", opts)
                           : ApiExecutor::load(require_existing(cfg, cfg.executor_registry, "paths.executor"), opts);
    exec.bind_specs(pool);
    return exec;
}

RuntimeConfig runtime_for(const Config& cfg) {
    RuntimeConfig rc;
    rc.k = cfg.sampler.k;
    rc.max_reprompts = cfg.max_reprompts;
    rc.max_rounds = cfg.max_rounds;
    rc.include_signatures = cfg.include_signatures;
    rc.templates = templates_for(cfg);
    return rc;
}


}  // namespace

std::vector<LabeledVector> embed_tools(const EmbeddingProvider& provider, std::span<const Tool> tools) {
    std::vector<std::string> texts;
    texts.reserve(tools.size());
    for (const auto& t : tools) {
        if (t.description.empty()) throw EmptyInput("tool '" + t.name + "' has an empty description");
        texts.push_back(t.description);
    }
    std::vector<EmbeddingVector> vecs = provider.embed_many(texts);
    std::vector<LabeledVector> out;
    out.reserve(tools.size());
    for (std::size_t i = 0; i < tools.size(); ++i) {
        const double norm = l2_norm(vecs[i]);
        if (norm == 0.0) throw ZeroVector("tool '" + tools[i].name + "' has a zero embedding");
        for (double& x : vecs[i].values) x /= norm;
        out.push_back({tools[i].name, std::move(vecs[i])});
    }
    return out;
}

void extend_clusters(ClusterModel& model, const EmbeddingProvider& provider, std::span<const Tool> tools) {
    std::vector<Tool> missing;
    for (const auto& t : tools) {
        if (!model.contains(t.name)) missing.push_back(t);
    }
    if (missing.empty()) return;
    for (auto& lv : embed_tools(provider, missing)) model.assign_new(lv.id, lv.vector);
}

int cmd_cluster(const Config& cfg, std::ostream& out) {
    const fs::path dest = require_path(cfg, cfg.clusters, "paths.clusters");
    const ToolPool pool = train_pool(cfg);
    auto provider = make_embedding_provider(cfg);
    const auto points = embed_tools(*provider, pool.tools());

    KMeansOptions opts;
    opts.m = cfg.m;
    opts.seed = derive_seed(cfg.seed, "kmeans");
    opts.max_iter = cfg.max_iter;
    opts.tol = cfg.tol;
    opts.parallel = cfg.parallel;
    const ClusterModel model = fit_kmeans(points, opts);
    save_clusters(model, dest);

    const auto sizes = model.sizes();
    const std::size_t widest = sizes.empty() ? 1 : *std::max_element(sizes.begin(), sizes.end());
    out << "clustered " << pool.size() << " tools into " << model.m() << " clusters (" << model.iterations
        << " iterations, sse " << std::setprecision(6) << model.sse << ")\n";
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const std::size_t bar = widest == 0 ? 0 : (sizes[c] * 40 + widest - 1) / widest;
        out << "  cluster " << std::setw(3) << c << " " << std::setw(5) << sizes[c] << " " << std::string(bar, '#')
            << "\n";
    }
    out << "wrote " << dest.string() << "\n";
    return 0;
}

int cmd_split_pool(const Config& cfg, std::ostream& out) {
    const ToolPool pool = load_pool(require_existing(cfg, cfg.pool, "paths.pool"));
    const fs::path train_dest = require_path(cfg, cfg.pool_train, "paths.pool_train");
    const fs::path test_dest = require_path(cfg, cfg.pool_test, "paths.pool_test");
    auto [train, test] = split_pool(pool, cfg.train_tools, derive_seed(cfg.seed, "pool-split"));
    save_pool(train, train_dest);
    save_pool(test, test_dest);
    out << "split " << pool.size() << " tools: " << train.size() << " train -> " << train_dest.string() << ", "
        << test.size() << " test -> " << test_dest.string() << "\n";
    return 0;
}

int cmd_build(const Config& cfg, std::ostream& out, std::ostream& err) {
    cfg.validate();
    const fs::path queries_path = require_existing(cfg, cfg.nosearch_queries, "paths.nosearch_queries");
    const std::vector<std::string> queries = read_queries(queries_path);
    if (queries.empty()) throw InvalidArgument("no NoSearch queries in " + queries_path.string());
    const fs::path dataset_dir = require_path(cfg, cfg.dataset_dir, "paths.dataset");

    const ToolPool train = train_pool(cfg);
    const auto test = test_pool(cfg);
    ClusterModel clusters = load_clusters(require_existing(cfg, cfg.clusters, "paths.clusters"));
    const PromptTemplates templates = templates_for(cfg);

    PairsByTool train_pairs, test_pairs;
    auto route = [&](PairsByTool&& all) {
        for (auto& [tool, list] : all) {
            if (train.contains(tool)) {
                auto& dst = train_pairs[tool];
                dst.insert(dst.end(), list.begin(), list.end());
            } else if (test && test->contains(tool)) {
                auto& dst = test_pairs[tool];
                dst.insert(dst.end(), list.begin(), list.end());
            } else {
                throw ValidationError("pairs mention tool '" + tool + "' which is in neither pool");
            }
        }
    };
    if (!cfg.pairs.empty()) {
        route(read_pairs(require_existing(cfg, cfg.pairs, "paths.pairs")));
        if (!cfg.test_pairs.empty()) route(read_pairs(require_existing(cfg, cfg.test_pairs, "paths.test_pairs")));
    } else {
        auto generator = make_backend(cfg.generator, cfg, "generator");
        auto checker = make_backend(cfg.checker, cfg, "checker");
        auto run = [&](const ToolPool& pool, PairsByTool& dst, const char* label) {
            GenerationReport rep =
                run_generation(pool, *generator, *checker, cfg.pairs_per_tool, templates, cfg.parallel);
            err << label << ": " << rep.generated << " generated, " << rep.malformed << " malformed, "
                << rep.rejected << " rejected by the checker";
            if (!rep.failed_tools.empty()) err << ", " << rep.failed_tools.size() << " tools skipped";
            err << "\n";
            for (const auto& name : rep.failed_tools) err << "  no usable pairs for '" << name << "'\n";
            dst = std::move(rep.pairs);
        };
        run(train, train_pairs, "train tools");
        if (test) run(*test, test_pairs, "test tools");
        const ToolPool all = merge_pools(train, test ? &*test : nullptr);
        PairsByTool merged = train_pairs;
        merged.insert(test_pairs.begin(), test_pairs.end());
        write_pairs(all, merged, dataset_dir / "pairs.jsonl");
    }

    auto provider = make_embedding_provider(cfg);
    if (test) extend_clusters(clusters, *provider, test->tools());

    AssemblyOptions opts;
    opts.sampler = cfg.sampler;
    opts.sampler.seed = cfg.seed;
    opts.proportions = {cfg.call_proportion, cfg.nocall_proportion};
    opts.seed = cfg.seed;
    opts.valid_fraction = cfg.valid_fraction;
    opts.valid_counts = cfg.valid_counts;
    const DatasetSplit split =
        assemble_dataset(train, clusters, train_pairs, queries, opts, test ? &*test : nullptr, test ? &test_pairs : nullptr);

    write_dataset(split, dataset_dir);
    const fs::path sft = cfg.sft.empty() ? dataset_dir / "sft.jsonl" : cfg.resolve(cfg.sft);
    export_sft(split, merge_pools(train, test ? &*test : nullptr), templates, sft, cfg.include_signatures);

    out << format_stats(compute_stats(split));
    return 0;
}

int cmd_export_sft(const Config& cfg, std::ostream& out) {
    const fs::path dataset_dir = require_existing(cfg, cfg.dataset_dir, "paths.dataset");
    const DatasetSplit split = read_dataset(dataset_dir);
    const ToolPool pool = full_pool(cfg);
    const fs::path sft = cfg.sft.empty() ? dataset_dir / "sft.jsonl" : cfg.resolve(cfg.sft);
    export_sft(split, pool, templates_for(cfg), sft, cfg.include_signatures);
    const auto n = split.train.size() + split.valid.size() + split.test.size();
    out << "wrote " << n << " conversations to " << sft.string() << "\n";
    return 0;
}

int cmd_eval(const Config& cfg, std::ostream& out) {
    cfg.validate();
    const fs::path dataset_dir = require_existing(cfg, cfg.dataset_dir, "paths.dataset");
    const fs::path split_file = dataset_dir / (cfg.eval_split + ".jsonl");
    if (!fs::exists(split_file)) throw IoError("cannot open " + split_file.string());
    const std::vector<Sample> samples = read_samples(split_file);
    const ToolPool pool = full_pool(cfg);
    for (const auto& s : samples) validate_sample(s, &pool);

    std::optional<ClusterModel> clusters;
    if (!cfg.clusters.empty()) {
        clusters = load_clusters(require_existing(cfg, cfg.clusters, "paths.clusters"));
        auto provider = make_embedding_provider(cfg);
        extend_clusters(*clusters, *provider, pool.tools());
    }
    const ApiExecutor executor = executor_for(cfg, pool);
    auto backend = make_backend(cfg.model, cfg, "model");

    EvalConfig ec;
    ec.runtime = runtime_for(cfg);
    ec.sampler = cfg.sampler;
    ec.policy = cfg.policy;
    ec.n_trials = cfg.trials;
    ec.base_seed = derive_seed(cfg.seed, "eval");
    ec.parallel = cfg.parallel;

    std::vector<std::vector<DecisionTrace>> traces;
    const MetricReport report =
        run_trials(samples, *backend, pool, clusters ? &*clusters : nullptr, executor, ec, &traces);

    const fs::path report_dir = cfg.report_dir.empty() ? dataset_dir / "report" : cfg.resolve(cfg.report_dir);
    write_text_file(report_dir / "report.json", to_json(report).dump(2) + "\n");
    const std::string table = format_report(report);
    write_text_file(report_dir / "report.txt", table);
    std::vector<Json> rows;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        for (const auto& tr : traces[t]) {
            Json j = to_json(tr);
            j["trial"] = t;
            rows.push_back(std::move(j));
        }
    }
    write_text_file(report_dir / "traces.jsonl", to_jsonl(rows));

    out << table;
    out << "wrote " << (report_dir / "report.json").string() << "\n";
    return 0;
}

int cmd_demo(const Config& cfg, std::istream& in, std::ostream& out, std::ostream& err) {
    const ToolPool pool = full_pool(cfg);
    const ApiExecutor executor = executor_for(cfg, pool);
    auto backend = make_backend(cfg.model, cfg, "model");
    auto provider = make_embedding_provider(cfg);
    CachedEmbedder embedder(*provider);
    const RuntimeConfig rc = runtime_for(cfg);

    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        try {
            const DecisionTrace trace = answer_query(line, *backend, pool, &embedder, executor, rc);
            // Intermediate steps are indented behind "  | ", the answer behind "=> ".
            for (const auto& step : trace.steps) {
                std::istringstream raw(step.raw_output);
                std::string part;
                bool first = true;
                while (std::getline(raw, part)) {
                    out << "  | " << (first ? "[" + step.stage + "] " : std::string()) << part << "\n";
                    first = false;
                }
            }
            for (const auto& call : trace.calls) {
                out << "  | call " << to_string(call.call) << " -> "
                    << (call.error ? "error: " + *call.error : std::to_string(call.response.status)) << "\n";
            }
            out << "  | branch " << to_string(trace.branch) << "\n";
            if (trace.aborted) {
                err << "query aborted: " << trace.error << "\n";
            } else {
                out << "=> " << trace.final_answer << "\n";
            }
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
        }
        out.flush();
    }
    return 0;
}

namespace {

bool is_path_key(const std::string& key) {
    return key.rfind("paths.", 0) == 0 || key == "model.script" || key == "generator.script" ||
           key == "checker.script";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Decision-aware tool usage: datasets, runtime and evaluation", "decitool"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallel;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "Configuration file");
    app.add_option("--seed", seed, "Seed for every random choice");
    app.add_option("--parallel", parallel, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--set", sets, "Override a configuration key (section.key=value)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    // Subcommand-level shortcuts, each mapped onto a configuration key.
    std::vector<std::pair<std::string, std::string>> overrides;
    auto shortcut = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
        sub->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) {
            overrides.emplace_back(key, v);
        }, help);
    };

    auto* cluster = app.add_subcommand("cluster", "Embed tool descriptions and fit K-means");
    shortcut(cluster, "--pool", "paths.pool", "Tool pool JSON");
    shortcut(cluster, "--out", "paths.clusters", "Cluster model output");
    shortcut(cluster, "-m,--clusters", "clustering.m", "Number of clusters");

    auto* split = app.add_subcommand("split-pool", "Split a tool pool into train and held-out tools");
    shortcut(split, "--pool", "paths.pool", "Tool pool JSON");
    shortcut(split, "--train-out", "paths.pool_train", "Train pool output");
    shortcut(split, "--test-out", "paths.pool_test", "Held-out pool output");
    shortcut(split, "--train-tools", "dataset.train_tools", "Number of train tools");

    auto* build = app.add_subcommand("build", "Assemble the dataset splits and SFT export");
    shortcut(build, "--pairs", "paths.pairs", "Query-call pairs JSONL");
    shortcut(build, "--queries", "paths.nosearch_queries", "NoSearch queries");
    shortcut(build, "--out", "paths.dataset", "Dataset directory");
    shortcut(build, "-k", "sampler.k", "Candidate toolset size");
    shortcut(build, "--mode", "sampler.mode", "Sampling strategy");

    auto* eval = app.add_subcommand("eval", "Run the decision runtime over a split and score it");
    shortcut(eval, "--dataset", "paths.dataset", "Dataset directory");
    shortcut(eval, "--split", "eval.split", "train, valid or test");
    shortcut(eval, "--trials", "eval.trials", "Number of trials");
    shortcut(eval, "--policy", "eval.policy", "decision-only, tool-match or full-match");
    shortcut(eval, "--report", "paths.report", "Report directory");
    shortcut(eval, "--script", "model.script", "Scripted model backend");

    auto* demo = app.add_subcommand("demo", "Answer queries from standard input");
    shortcut(demo, "--script", "model.script", "Scripted model backend");

    auto* sft = app.add_subcommand("export-sft", "Render a dataset as chat-format SFT records");
    shortcut(sft, "--dataset", "paths.dataset", "Dataset directory");
    shortcut(sft, "--out", "paths.sft", "SFT output");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        Config cfg = config_path.empty() ? Config{} : load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (parallel) cfg.parallel = *parallel;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            const std::string key = CLI::detail::trim_copy(s.substr(0, eq));
            std::string value = s.substr(eq + 1);
            if (is_path_key(key) && !value.empty()) value = fs::absolute(value).string();
            apply_setting(cfg, key, value);
        }
        for (const auto& [key, value] : overrides) {
            // A script on the command line implies a scripted model.
            if (key == "model.script") apply_setting(cfg, "model.kind", "scripted");
            // Command-line paths are relative to the working directory.
            if (is_path_key(key)) {
                apply_setting(cfg, key, fs::absolute(value).string());
            } else {
                apply_setting(cfg, key, value);
            }
        }
        cfg.validate();

        if (cluster->parsed()) return cmd_cluster(cfg, out);
        if (split->parsed()) return cmd_split_pool(cfg, out);
        if (build->parsed()) return cmd_build(cfg, out, err);
        if (eval->parsed()) return cmd_eval(cfg, out);
        if (demo->parsed()) return cmd_demo(cfg, in, out, err);
        if (sft->parsed()) return cmd_export_sft(cfg, out);
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.error_class() == ErrorClass::Config ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, in, out, err);
}

}  // namespace decitool
