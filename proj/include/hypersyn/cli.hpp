#pragma once

// The hypersyn command line: generate, train, evaluate, ablate, analyze-graph.
// Options resolve as flags > config file > HYPERSYN_SEED (seed only) >
// profile defaults. Every run writes config.json and run.log.jsonl to --out.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hypersyn/data.hpp"
#include "hypersyn/errors.hpp"
#include "hypersyn/graph_analysis.hpp"
#include "hypersyn/metrics.hpp"
#include "hypersyn/model.hpp"
#include "hypersyn/optim.hpp"
#include "hypersyn/synthetic.hpp"
#include "hypersyn/trainer.hpp"

namespace hypersyn::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalAbort = 3 };

struct Profile {
    std::size_t input_dim;
    std::size_t latent_dim;
    std::size_t user_dim;
    std::size_t hidden;
};

inline Profile profile(std::string_view name) {
    if (name == "desk") return {16, 16, 16, 32};
    if (name == "paper") return {768, 100, 512, 768};
    throw ContractViolation("unknown profile '" + std::string(name) + "'");
}

struct RunConfig {
    std::string command;
    std::string profile = "desk";
    std::uint64_t seed = 7;
    std::string corpus;
    std::string out = "hypersyn-out";
    std::string checkpoint;
    std::string variant = "full";
    model::ModelConfig model;
    train::TrainConfig train;
    synthetic::SyntheticConfig generate;
    std::vector<double> threshold_sweep;
    std::string input;
    std::string report;
    graph::DeltaOptions delta;
};

inline nlohmann::json to_json(const RunConfig& rc) {
    nlohmann::json j = {{"command", rc.command}, {"profile", rc.profile}, {"seed", rc.seed}, {"out", rc.out}};
    if (rc.command == "generate") {
        const auto& g = rc.generate;
        j["generate"] = {{"n_users", g.n_users},
                         {"n_trees", g.n_trees},
                         {"dim", g.dim},
                         {"hateful_fraction", g.hateful_fraction},
                         {"homophily", g.homophily},
                         {"context_sensitivity", g.context_sensitivity},
                         {"communities", g.communities},
                         {"mean_tree_size", g.mean_tree_size}};
        return j;
    }
    if (rc.command == "analyze-graph") {
        j["input"] = rc.input;
        j["corpus"] = rc.corpus;
        j["report"] = rc.report;
        j["delta"] = {{"exact_limit", rc.delta.exact_limit}, {"samples", rc.delta.samples}};
        return j;
    }
    j["corpus"] = rc.corpus;
    j["checkpoint"] = rc.checkpoint;
    j["variant"] = rc.variant;
    j["model"] = model::to_json(rc.model);
    const auto& t = rc.train;
    j["train"] = {{"batch_trees", t.batch_trees},
                  {"max_epochs", t.max_epochs},
                  {"patience", t.patience},
                  {"lr", t.adam.lr},
                  {"weight_decay", t.adam.weight_decay},
                  {"threshold", t.threshold},
                  {"loss_check_epochs", t.loss_check_epochs}};
    if (!rc.threshold_sweep.empty()) j["threshold_sweep"] = rc.threshold_sweep;
    return j;
}

/// One JSON object per line, flushed per event.
class RunLog {
public:
    explicit RunLog(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw DataError(path.string(), 0, "", "cannot open for writing");
    }
    void write(const nlohmann::json& event) { out_ << event.dump() << '\n' << std::flush; }

private:
    std::ofstream out_;
};

inline nlohmann::json to_json(const graph::ScaleFreeReport& r) {
    nlohmann::json j = {{"nodes", r.nodes},
                        {"edges", r.edges},
                        {"fit_ok", r.fit_ok},
                        {"delta", r.delta.delta},
                        {"delta_method", r.delta.method()},
                        {"delta_largest_component", r.delta.largest_component},
                        {"delta_nodes", r.delta.nodes}};
    if (r.fit_ok) {
        j["gamma"] = r.fit.gamma;
        j["xmin"] = r.fit.xmin;
        j["ks_distance"] = r.fit.ks_distance;
        j["tail_size"] = r.fit.tail_size;
        j["gamma_closed_form"] = r.fit.gamma_closed_form;
    } else {
        j["fit_error"] = r.fit_error;
    }
    return j;
}

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw DataError(path.string(), 0, "", "cannot open for writing");
    out << j.dump(2) << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError(path.string(), 0, "", "cannot open for writing");
    out << text;
}

inline data::Corpus load_corpus(const std::string& dir) {
    if (dir.empty()) throw ContractViolation("--corpus is required");
    return data::load_corpus(data::CorpusPaths::in_directory(dir));
}

inline nlohmann::json training_summary(const train::TrainResult& r) {
    return {{"epochs_run", r.epochs.size()},
            {"best_epoch", r.best_epoch},
            {"best_val_f1", r.best_val_f1},
            {"epoch0_loss", r.epoch0_loss},
            {"loss_not_decreasing", r.loss_not_decreasing},
            {"stopped_early", r.stopped_early}};
}

inline nlohmann::json checkpoint_meta(const model::ModelConfig& m, const train::TrainResult* r) {
    nlohmann::json meta = {{"model", model::to_json(m)}};
    if (r) meta["training"] = training_summary(*r);
    return meta;
}

struct Context {
    RunConfig& rc;
    std::filesystem::path out;
    RunLog& log;
    std::ostream& stdout_;
};

inline void save_diverged(const Context& ctx, const train::DivergenceError& e, const model::ModelConfig& m,
                          const std::string& name) {
    auto meta = checkpoint_meta(m, nullptr);
    meta["diverged_at_epoch"] = e.epoch();
    const auto path = ctx.out / name;
    save_checkpoint(path.string(), e.last_good(), meta);
    ctx.log.write({{"event", "diverged"}, {"epoch", e.epoch()}, {"message", e.what()}, {"checkpoint", path.string()}});
}

inline train::EpochCallback epoch_logger(RunLog& log, const std::string& variant) {
    return [&log, variant](const train::EpochRecord& rec) {
        auto j = train::to_json(rec);
        j["variant"] = variant;
        log.write(j);
    };
}

inline void cmd_generate(Context& ctx) {
    auto& g = ctx.rc.generate;
    const auto syn = synthetic::generate_synthetic(g);
    data::save_corpus(syn.corpus, ctx.out);
    std::ofstream latent(ctx.out / "latent_users.jsonl");
    if (!latent) throw DataError((ctx.out / "latent_users.jsonl").string(), 0, "", "cannot open for writing");
    for (std::size_t i = 0; i < syn.corpus.users.size(); ++i)
        latent << nlohmann::json{{"user_id", syn.corpus.users[i].id},
                                 {"hateful", syn.hateful[i]},
                                 {"community", syn.community[i]}}
                      .dump()
               << '\n';
    const nlohmann::json summary = {{"event", "generated"},
                                    {"trees", syn.corpus.trees.size()},
                                    {"utterances", syn.corpus.utterance_count()},
                                    {"users", syn.corpus.users.size()},
                                    {"social_edges", syn.corpus.graph.edge_count()}};
    ctx.log.write(summary);
    ctx.stdout_ << "wrote " << summary["trees"] << " trees, " << summary["utterances"] << " utterances, "
                << summary["users"] << " users to " << ctx.out.string() << "\n";
}

inline void cmd_train(Context& ctx) {
    auto& rc = ctx.rc;
    const auto corpus = load_corpus(rc.corpus);
    rc.model.input_dim = corpus.dim;
    rc.model.variant = model::parse_variant(rc.variant);
    write_json(ctx.out / "config.json", to_json(rc));

    model::CosynModel m(rc.model);
    const auto prep = m.prepare(corpus);
    train::TrainResult result;
    try {
        result = train::train(m, prep, rc.train, epoch_logger(ctx.log, rc.variant));
    } catch (const train::DivergenceError& e) {
        save_diverged(ctx, e, rc.model, "checkpoint.json");
        throw;
    }
    if (result.loss_not_decreasing)
        ctx.log.write({{"event", "warning"},
                       {"message", "training loss did not decrease over the first epochs"},
                       {"window", rc.train.loss_check_epochs}});
    const auto test = train::evaluate(m, prep, data::Split::Test, rc.train.threshold);
    save_checkpoint((ctx.out / "checkpoint.json").string(), m.parameters(), checkpoint_meta(rc.model, &result));
    const nlohmann::json metrics = {{"variant", rc.variant},
                                    {"threshold", rc.train.threshold},
                                    {"test", metrics::to_json(test)},
                                    {"training", training_summary(result)}};
    write_json(ctx.out / "metrics.json", metrics);
    const auto table = metrics::format_table({{std::string(model::table_label(rc.model.variant)), test}});
    write_text(ctx.out / "table.txt", table);
    ctx.log.write({{"event", "result"}, {"test", metrics::to_json(test)}, {"training", training_summary(result)}});
    ctx.stdout_ << table;
}

inline void cmd_evaluate(Context& ctx) {
    auto& rc = ctx.rc;
    if (rc.checkpoint.empty()) throw ContractViolation("--checkpoint is required");
    const auto loaded = load_checkpoint(rc.checkpoint);
    if (!loaded.meta.contains("model")) throw DataError(rc.checkpoint, 0, "meta.model", "missing model configuration");
    try {
        rc.model = model::model_config_from_json(loaded.meta.at("model"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(rc.checkpoint, 0, "meta.model", e.what());
    }
    rc.variant = std::string(model::to_string(rc.model.variant));
    const auto corpus = load_corpus(rc.corpus);
    write_json(ctx.out / "config.json", to_json(rc));

    model::CosynModel m(rc.model);
    try {
        m.parameters().copy_values_from(loaded.params);
    } catch (const ContractViolation& e) {
        throw DataError(rc.checkpoint, 0, "params", std::string("checkpoint does not match the model: ") + e.what());
    }
    const auto prep = m.prepare(corpus);
    const auto trees = train::trees_in_split(corpus, data::Split::Test);
    if (trees.empty()) throw DataError("evaluate: corpus has no test split");
    const auto probs = m.predict(prep, trees);
    const auto test = metrics::evaluate_predictions(corpus, probs, data::Split::Test, rc.train.threshold);

    std::vector<metrics::TableRow> rows{{std::string(model::table_label(rc.model.variant)), test}};
    nlohmann::json sweep = nlohmann::json::array();
    for (double t : rc.threshold_sweep) {
        if (!(t > 0.0 && t < 1.0)) throw ContractViolation("threshold sweep values must lie in (0, 1)");
        const auto r = metrics::evaluate_predictions(corpus, probs, data::Split::Test, t);
        sweep.push_back({{"threshold", t}, {"test", metrics::to_json(r)}});
        char label[32];
        std::snprintf(label, sizeof label, "threshold %.2f", t);
        rows.push_back({label, r});
    }
    nlohmann::json metrics = {{"variant", rc.variant}, {"threshold", rc.train.threshold}, {"test", metrics::to_json(test)}};
    if (!sweep.empty()) metrics["threshold_sweep"] = sweep;
    write_json(ctx.out / "metrics.json", metrics);
    const auto table = metrics::format_table(rows);
    write_text(ctx.out / "table.txt", table);
    ctx.log.write({{"event", "result"}, {"test", metrics::to_json(test)}});
    ctx.stdout_ << table;
}

inline void cmd_ablate(Context& ctx) {
    auto& rc = ctx.rc;
    std::vector<model::Variant> variants;
    if (rc.variant == "all") variants.assign(model::kAllVariants.begin(), model::kAllVariants.end());
    else variants.push_back(model::parse_variant(rc.variant));
    const auto corpus = load_corpus(rc.corpus);
    rc.model.input_dim = corpus.dim;
    write_json(ctx.out / "config.json", to_json(rc));

    std::vector<metrics::TableRow> rows;
    nlohmann::json results = nlohmann::json::array();
    for (const auto v : variants) {
        const std::string name(model::to_string(v));
        ctx.log.write({{"event", "variant_start"}, {"variant", name}});
        train::AblationResult r;
        try {
            r = train::run_ablation(corpus, rc.model, rc.train, v, epoch_logger(ctx.log, name));
        } catch (const train::DivergenceError& e) {
            auto mcfg = rc.model;
            mcfg.variant = v;
            save_diverged(ctx, e, mcfg, "checkpoint_" + name + ".json");
            throw;
        }
        rows.push_back({std::string(model::table_label(v)), r.test});
        nlohmann::json row = {{"variant", name},
                              {"label", model::table_label(v)},
                              {"test", metrics::to_json(r.test)},
                              {"training", training_summary(r.training)}};
        ctx.log.write({{"event", "variant_result"}, {"variant", name}, {"test", row["test"]}});
        results.push_back(std::move(row));
    }
    write_json(ctx.out / "ablation.json", {{"threshold", rc.train.threshold}, {"rows", results}});
    const auto table = metrics::format_table(rows);
    write_text(ctx.out / "table.txt", table);
    ctx.stdout_ << table;
}

inline graph::Graph graph_from_edges(const std::vector<data::SocialEdge>& edges) {
    std::map<std::string, std::size_t> index;
    for (const auto& e : edges) {
        index.emplace(e.src, 0);
        index.emplace(e.dst, 0);
    }
    std::size_t next = 0;
    for (auto& [id, i] : index) i = next++;
    graph::Graph g(index.size());
    for (const auto& e : edges) g.add_edge(index.at(e.src), index.at(e.dst));
    return g;
}

inline void cmd_analyze_graph(Context& ctx) {
    auto& rc = ctx.rc;
    if (rc.input.empty()) throw ContractViolation("--input is required");
    graph::Graph g;
    std::string source;
    if (std::filesystem::is_regular_file(rc.input)) {
        const auto edges = data::load_social_edges(rc.input);
        if (edges.empty()) throw DataError(rc.input, 0, "", "no edges");
        g = graph_from_edges(edges);
        source = "social_edges";
    } else {
        if (rc.corpus.empty())
            throw DataError(rc.input, 0, "", "not a file; pass --corpus to look it up as a tree id");
        const auto corpus = load_corpus(rc.corpus);
        const data::ConversationTree* tree = nullptr;
        for (const auto& t : corpus.trees)
            if (t.id == rc.input) tree = &t;
        if (!tree) throw DataError(rc.corpus, 0, "tree_id", "no tree with id " + rc.input);
        g = synthetic::to_graph(*tree);
        source = "tree";
    }
    rc.delta.seed = rc.seed;
    const auto report = graph::analyze(g, rc.delta);
    auto j = to_json(report);
    j["input"] = rc.input;
    j["source"] = source;
    const std::filesystem::path path = rc.report.empty() ? ctx.out / "report.json" : std::filesystem::path(rc.report);
    write_json(path, j);
    ctx.log.write({{"event", "result"}, {"report", j}});
    ctx.stdout_ << j.dump(2) << "\n";
}

}  // namespace detail

/// Runs one command. `out` receives tables and summaries, `err` diagnostics
/// and usage text.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig rc;
    CLI::App app{"Hyperbolic context-aware hate speech detection toolkit", "hypersyn"};
    app.fallthrough();
    app.set_config("--config", "", "key=value configuration file ([section] per subcommand)");
    app.add_option("--seed", rc.seed, "Seed for data generation, initialisation, shuffling and dropout")
        ->envname("HYPERSYN_SEED");
    app.add_option("--profile", rc.profile, "Default dimensions: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    app.add_option("--corpus", rc.corpus, "Corpus directory");
    app.add_option("--out", rc.out, "Output directory");
    app.add_option("-b,--batch-size", rc.train.batch_trees, "Trees per batch");
    auto* user_dim = app.add_option("-g,--user-dim", rc.model.user_dim, "HGCN output dimension");
    auto* hidden = app.add_option("--hidden", rc.model.hidden, "CSHT hidden dimension");
    auto* latent = app.add_option("-l,--latent-dim", rc.model.latent_dim, "HFAN latent dimension");
    app.add_option("--lr", rc.train.adam.lr, "Learning rate");
    app.add_option("--weight-decay", rc.train.adam.weight_decay, "Decoupled weight decay");
    app.add_option("--dropout", rc.model.dropout, "Dropout rate");
    app.add_option("--variant", rc.variant, "Model variant (ablate also accepts 'all')");
    app.add_option("--epochs", rc.train.max_epochs, "Maximum epochs");
    app.add_option("--patience", rc.train.patience, "Early-stopping patience in epochs");
    app.add_option("--threshold", rc.train.threshold, "Decision threshold on P(hate)");
    app.add_option("--loss-check-epochs", rc.train.loss_check_epochs, "Window for the loss-decrease check");
    app.add_option("--hgcn-layers", rc.model.hgcn_layers, "HGCN layers");
    app.add_flag("--train-curvature", rc.model.train_curvature, "Learn intermediate HGCN curvatures");
    app.add_flag("--freeze-context", rc.model.freeze_context, "Keep HFAN/HGCN at initialisation");
    app.add_option("--frechet-tol", rc.model.frechet.tolerance, "Frechet mean gradient-norm tolerance");
    app.add_option("--frechet-iters", rc.model.frechet.max_iterations, "Frechet mean iteration cap");
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Write a synthetic corpus to --out");
    auto& gc = rc.generate;
    gen->add_option("--n-users", gc.n_users, "Users");
    gen->add_option("--n-trees", gc.n_trees, "Conversation trees");
    auto* dim = gen->add_option("--dim", gc.dim, "Embedding dimension");
    gen->add_option("--hateful-fraction", gc.hateful_fraction, "Fraction of hateful users");
    gen->add_option("--homophily", gc.homophily, "Community homophily of hateful users");
    gen->add_option("--context-sensitivity", gc.context_sensitivity, "Fraction of hate made implicit");
    gen->add_option("--communities", gc.communities, "Communities in the social graph");
    gen->add_option("--mean-tree-size", gc.mean_tree_size, "Mean utterances per tree");

    app.add_subcommand("train", "Train on --corpus, write checkpoint, metrics and table to --out");
    auto* evl = app.add_subcommand("evaluate", "Evaluate --checkpoint on the test split of --corpus");
    evl->add_option("--checkpoint", rc.checkpoint, "Checkpoint written by train");
    evl->add_option("--threshold-sweep", rc.threshold_sweep, "Extra thresholds to report (analysis only)")
        ->delimiter(',');
    app.add_subcommand("ablate", "Train and evaluate model variants, emit one table");
    auto* ana = app.add_subcommand("analyze-graph", "Power-law fit and Gromov delta for a graph");
    ana->add_option("--input", rc.input, "social_edges.jsonl path, or a tree id looked up in --corpus");
    ana->add_option("--report", rc.report, "Report path (default <out>/report.json)");
    ana->add_option("--exact-limit", rc.delta.exact_limit, "Largest graph for exact delta enumeration");
    ana->add_option("--delta-samples", rc.delta.samples, "Quadruples sampled on larger graphs");

    if (argc <= 1) {
        err << app.help();
        return kUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    rc.command = app.get_subcommands().front()->get_name();

    const Profile p = profile(rc.profile);
    if (user_dim->count() == 0) rc.model.user_dim = p.user_dim;
    if (hidden->count() == 0) rc.model.hidden = p.hidden;
    if (latent->count() == 0) rc.model.latent_dim = p.latent_dim;
    if (dim->count() == 0) gc.dim = p.input_dim;
    rc.model.seed = rc.seed;
    rc.train.seed = rc.seed;
    gc.seed = rc.seed;

    std::filesystem::path out_dir;
    std::unique_ptr<RunLog> log;
    try {
        out_dir = rc.out;
        std::filesystem::create_directories(out_dir);
        detail::write_json(out_dir / "config.json", to_json(rc));
        log = std::make_unique<RunLog>(out_dir / "run.log.jsonl");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    log->write({{"event", "start"}, {"command", rc.command}, {"seed", rc.seed}});

    auto fail = [&](const char* kind, const std::exception& e, int code) {
        log->write({{"event", "error"}, {"kind", kind}, {"message", e.what()}, {"exit_code", code}});
        err << "error: " << e.what() << "\n";
        return code;
    };
    try {
        rc.model.validate();
        rc.train.validate();
        detail::Context ctx{rc, out_dir, *log, out};
        if (rc.command == "generate") detail::cmd_generate(ctx);
        else if (rc.command == "train") detail::cmd_train(ctx);
        else if (rc.command == "evaluate") detail::cmd_evaluate(ctx);
        else if (rc.command == "ablate") detail::cmd_ablate(ctx);
        else detail::cmd_analyze_graph(ctx);
    } catch (const ContractViolation& e) {
        return fail("usage", e, kUsage);
    } catch (const DataError& e) {
        return fail("data", e, kDataError);
    } catch (const NumericalError& e) {
        return fail("numerical", e, kNumericalAbort);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail("data", e, kDataError);
    }
    log->write({{"event", "end"}, {"command", rc.command}});
    return kOk;
}

}  // namespace hypersyn::cli
