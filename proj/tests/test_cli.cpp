#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "hypersyn/cli.hpp"
#include "support/tempdir.hpp"

namespace fs = std::filesystem;
using hypersyn::testing::read_file;
using hypersyn::testing::TempDir;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "hypersyn");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = hypersyn::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

std::vector<json> read_log(const fs::path& dir) {
    std::vector<json> events;
    std::istringstream in(read_file(dir / "run.log.jsonl"));
    for (std::string line; std::getline(in, line);) events.push_back(json::parse(line));
    return events;
}

const std::vector<std::string> kCorpusFiles = {"utterances.jsonl", "embeddings.jsonl", "user_histories.jsonl",
                                               "social_edges.jsonl", "latent_users.jsonl"};

// small model and corpus so whole runs take well under a second
std::vector<std::string> tiny_corpus(const fs::path& out, const std::string& seed = "7") {
    return {"--seed", seed, "--out", out.string(), "generate", "--n-users", "30", "--n-trees", "40", "--dim", "6"};
}

std::vector<std::string> tiny_model() { return {"--hidden", "5", "--user-dim", "4", "--latent-dim", "4"}; }

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

class ScopedEnv {
public:
    ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
    ~ScopedEnv() { ::unsetenv(name_); }

private:
    const char* name_;
};

}  // namespace

TEST(Cli, NoArgumentsPrintsUsage) {
    const auto r = run({});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("generate"), std::string::npos);
    EXPECT_NE(r.err.find("analyze-graph"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    TempDir dir;
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"--out", dir.path().string(), "--profile", "huge", "train"}).code, 1);
    EXPECT_EQ(run({"--out", dir.path().string(), "--epochs", "x", "train"}).code, 1);
    EXPECT_EQ(run({"--out", dir.path().string(), "train"}).code, 1);  // no --corpus
    EXPECT_EQ(run({"--out", dir.path().string(), "--dropout", "1.5", "train"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, GenerateIsDeterministic) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "a")).code, 0);
    ASSERT_EQ(run(tiny_corpus(dir / "b")).code, 0);
    ASSERT_EQ(run(tiny_corpus(dir / "c", "8")).code, 0);
    for (const auto& f : kCorpusFiles) {
        const auto a = read_file(dir / "a" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, read_file(dir / "b" / f)) << f;
    }
    EXPECT_NE(read_file(dir / "a" / "utterances.jsonl"), read_file(dir / "c" / "utterances.jsonl"));
    const auto cfg = read_json(dir / "a" / "config.json");
    EXPECT_EQ(cfg["seed"], 7);
    EXPECT_EQ(cfg["generate"]["n_trees"], 40);
    EXPECT_EQ(cfg["generate"]["dim"], 6);
    const auto log = read_log(dir / "a");
    EXPECT_EQ(log.front()["event"], "start");
    EXPECT_EQ(log.back()["event"], "end");
}

TEST(Cli, SeedPrecedence) {
    TempDir dir;
    dir.write("run.ini", "seed = 11\n[generate]\nn-trees = 15\n");
    const auto conf = (dir / "run.ini").string();
    auto seed_of = [&](const std::string& sub, std::vector<std::string> args) {
        const auto out = dir / sub;
        args = concat({"--out", out.string()}, args);
        args.insert(args.end(), {"generate", "--n-users", "20", "--dim", "6"});
        EXPECT_EQ(run(args).code, 0);
        return read_json(out / "config.json");
    };
    EXPECT_EQ(seed_of("default", {})["seed"], 7);
    {
        ScopedEnv env("HYPERSYN_SEED", "5");
        EXPECT_EQ(seed_of("env", {})["seed"], 5);
        const auto file = seed_of("file", {"--config", conf});
        EXPECT_EQ(file["seed"], 11);
        EXPECT_EQ(file["generate"]["n_trees"], 15);
        EXPECT_EQ(seed_of("flag", {"--config", conf, "--seed", "3"})["seed"], 3);
    }
}

TEST(Cli, ProfilesSetDimensions) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "corpus")).code, 0);
    auto model_of = [&](std::vector<std::string> args) {
        const auto out = dir / "m";
        run(concat({"--out", out.string(), "--corpus", (dir / "corpus").string(), "--epochs", "1", "--patience", "1"},
                   concat(args, {"train"})));
        return read_json(out / "config.json")["model"];
    };
    const auto desk = model_of({});
    EXPECT_EQ(desk["hidden"], 32);
    EXPECT_EQ(desk["user_dim"], 16);
    EXPECT_EQ(desk["input_dim"], 6);
    const auto custom = model_of(tiny_model());
    EXPECT_EQ(custom["hidden"], 5);
    EXPECT_EQ(custom["latent_dim"], 4);
}

TEST(Cli, TrainThenEvaluateReproducesMetrics) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "corpus")).code, 0);
    const auto corpus = (dir / "corpus").string();
    const auto train = run(concat({"--out", (dir / "train").string(), "--corpus", corpus, "--epochs", "3"},
                                  concat(tiny_model(), {"train"})));
    ASSERT_EQ(train.code, 0) << train.err;
    EXPECT_NE(train.out.find("CoSyn"), std::string::npos);
    for (const auto* f : {"checkpoint.json", "metrics.json", "table.txt", "config.json", "run.log.jsonl"})
        EXPECT_TRUE(fs::exists(dir / "train" / f)) << f;
    int epochs = 0;
    for (const auto& e : read_log(dir / "train"))
        if (e["event"] == "epoch") {
            ++epochs;
            EXPECT_EQ(e["variant"], "full");
            EXPECT_TRUE(e["val"].contains("implicit"));
        }
    EXPECT_GE(epochs, 1);

    const auto eval = run({"--out", (dir / "eval").string(), "--corpus", corpus, "evaluate", "--checkpoint",
                           (dir / "train" / "checkpoint.json").string(), "--threshold-sweep", "0.3,0.7"});
    ASSERT_EQ(eval.code, 0) << eval.err;
    const auto trained = read_json(dir / "train" / "metrics.json");
    const auto evaluated = read_json(dir / "eval" / "metrics.json");
    EXPECT_EQ(evaluated["test"], trained["test"]);
    EXPECT_EQ(evaluated["threshold_sweep"].size(), 2u);
    EXPECT_NE(eval.out.find("threshold 0.30"), std::string::npos);

    // same config and seed: identical artifacts
    ASSERT_EQ(run(concat({"--out", (dir / "again").string(), "--corpus", corpus, "--epochs", "3"},
                         concat(tiny_model(), {"train"})))
                  .code,
              0);
    EXPECT_EQ(read_file(dir / "again" / "checkpoint.json"), read_file(dir / "train" / "checkpoint.json"));
    EXPECT_EQ(read_json(dir / "again" / "metrics.json"), trained);
}

TEST(Cli, DataErrorsExitTwo) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "corpus")).code, 0);
    const auto corpus = (dir / "corpus").string();
    const auto out = (dir / "o").string();
    EXPECT_EQ(run({"--out", out, "--corpus", (dir / "missing").string(), "train"}).code, 2);
    EXPECT_EQ(run({"--out", out, "--corpus", corpus, "evaluate", "--checkpoint", (dir / "none.json").string()}).code, 2);
    dir.write("bad.json", "{\"format\": \"hypersyn-checkpoint\"}");
    EXPECT_EQ(run({"--out", out, "--corpus", corpus, "evaluate", "--checkpoint", (dir / "bad.json").string()}).code, 2);
    EXPECT_EQ(run({"--out", out, "--corpus", corpus, "evaluate"}).code, 1);

    std::ofstream(dir / "corpus" / "utterances.jsonl", std::ios::app) << "{not json\n";
    const auto r = run({"--out", out, "--corpus", corpus, "train"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("utterances.jsonl"), std::string::npos);
    const auto log = read_log(dir / "o");
    EXPECT_EQ(log.back()["event"], "error");
    EXPECT_EQ(log.back()["exit_code"], 2);
}

TEST(Cli, DivergenceExitsThreeWithLastGoodCheckpoint) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "corpus")).code, 0);
    const auto r = run(concat({"--out", (dir / "o").string(), "--corpus", (dir / "corpus").string(), "--lr", "1e300",
                               "--epochs", "3"},
                              concat(tiny_model(), {"train"})));
    EXPECT_EQ(r.code, 3) << r.err;
    const auto ckpt = hypersyn::load_checkpoint((dir / "o" / "checkpoint.json").string());
    EXPECT_TRUE(ckpt.meta.contains("diverged_at_epoch"));
    for (const auto& p : ckpt.params)
        for (double v : p->value) EXPECT_TRUE(std::isfinite(v)) << p->name;
}

TEST(Cli, AblateAllEmitsEightRowTable) {
    TempDir dir;
    ASSERT_EQ(run(tiny_corpus(dir / "corpus")).code, 0);
    const auto r = run(concat({"--out", (dir / "abl").string(), "--corpus", (dir / "corpus").string(), "--epochs", "1",
                               "--variant", "all"},
                              concat(tiny_model(), {"ablate"})));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ab = read_json(dir / "abl" / "ablation.json");
    ASSERT_EQ(ab["rows"].size(), 8u);
    std::size_t i = 0;
    for (auto v : hypersyn::model::kAllVariants) {
        EXPECT_EQ(ab["rows"][i]["variant"], hypersyn::model::to_string(v));
        EXPECT_NE(r.out.find(hypersyn::model::table_label(v)), std::string::npos);
        ++i;
    }
    EXPECT_EQ(read_file(dir / "abl" / "table.txt"), r.out);
    EXPECT_EQ(run({"--out", (dir / "x").string(), "--corpus", (dir / "corpus").string(), "--variant", "nope", "ablate"})
                  .code,
              1);
}

TEST(Cli, AnalyzeGraph) {
    TempDir dir;
    ASSERT_EQ(run({"--out", (dir / "corpus").string(), "generate", "--n-users", "300", "--n-trees", "30", "--dim", "6"})
                  .code,
              0);
    const auto report = (dir / "report.json").string();
    const auto r = run({"--out", (dir / "a").string(), "analyze-graph", "--input",
                        (dir / "corpus" / "social_edges.jsonl").string(), "--report", report, "--delta-samples",
                        "20000"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = read_json(report);
    EXPECT_EQ(j["nodes"], 300);
    EXPECT_TRUE(j["fit_ok"].get<bool>());
    EXPECT_GT(j["gamma"].get<double>(), 1.0);
    EXPECT_EQ(j["delta_method"], "sampled lower bound");

    const auto tree = run({"--out", (dir / "t").string(), "--corpus", (dir / "corpus").string(), "analyze-graph",
                           "--input", "t00000"});
    ASSERT_EQ(tree.code, 0) << tree.err;
    const auto tj = read_json(dir / "t" / "report.json");
    EXPECT_EQ(tj["source"], "tree");
    EXPECT_EQ(tj["delta"], 0.0);

    EXPECT_EQ(run({"--out", (dir / "t").string(), "--corpus", (dir / "corpus").string(), "analyze-graph", "--input",
                   "no-such-tree"})
                  .code,
              2);
    EXPECT_EQ(run({"--out", (dir / "t").string(), "analyze-graph"}).code, 1);
}
