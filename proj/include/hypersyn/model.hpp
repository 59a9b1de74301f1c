#pragma once

// Full model: user context (HFAN over histories, HGCN over the social graph),
// the bidirectional CSHT over each conversation tree, and an MLP classifier on
// [log0 h_up; log0 h_down; x].

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/csht.hpp"
#include "hypersyn/data.hpp"
#include "hypersyn/errors.hpp"
#include "hypersyn/geometry.hpp"
#include "hypersyn/hfan.hpp"
#include "hypersyn/hgcn.hpp"
#include "hypersyn/hyperbolic.hpp"
#include "hypersyn/optim.hpp"

namespace hypersyn::model {

enum class Variant {
    Full,
    NoDft,
    NoHfan,
    NoHgcn,
    NoHfanNoHgcn,
    NoUserContext,
    Unidirectional,
    Euclidean,
};

inline constexpr std::array<Variant, 8> kAllVariants = {
    Variant::Full,   Variant::NoDft,         Variant::NoHfan,         Variant::NoHgcn,
    Variant::NoHfanNoHgcn, Variant::NoUserContext, Variant::Unidirectional, Variant::Euclidean,
};

inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoDft: return "no_dft";
        case Variant::NoHfan: return "no_hfan";
        case Variant::NoHgcn: return "no_hgcn";
        case Variant::NoHfanNoHgcn: return "no_hfan_no_hgcn";
        case Variant::NoUserContext: return "no_user_context";
        case Variant::Unidirectional: return "unidirectional";
        case Variant::Euclidean: return "euclidean";
    }
    return "?";
}

/// Row label used in the ablation table.
inline std::string_view table_label(Variant v) {
    switch (v) {
        case Variant::Full: return "CoSyn";
        case Variant::NoDft: return "- DFT";
        case Variant::NoHfan: return "- HFAN";
        case Variant::NoHgcn: return "- HGCN";
        case Variant::NoHfanNoHgcn: return "- HFAN - HGCN";
        case Variant::NoUserContext: return "- User Context";
        case Variant::Unidirectional: return "BiCSHT -> UniCSHT";
        case Variant::Euclidean: return "Hyperbolic -> Euclidean";
    }
    return "?";
}

inline Variant parse_variant(std::string_view s) {
    for (Variant v : kAllVariants)
        if (to_string(v) == s) return v;
    throw ContractViolation("unknown variant: " + std::string(s));
}

struct ModelConfig {
    std::size_t input_dim = 16;   // d, utterance embedding size
    std::size_t latent_dim = 16;  // l, HFAN output
    std::size_t user_dim = 16;    // g, HGCN output
    std::size_t hidden = 32;      // h, CSHT hidden size and classifier hidden layer
    std::size_t hgcn_layers = 2;
    bool train_curvature = false;
    bool freeze_context = false;  // HFAN/HGCN fixed at initialisation, contexts cached
    double dropout = 0.41;
    Variant variant = Variant::Full;
    std::uint64_t seed = 7;
    geo::FrechetOptions frechet{};

    bool euclidean() const { return variant == Variant::Euclidean; }
    bool use_user() const { return variant != Variant::NoUserContext; }
    bool use_hfan() const { return variant != Variant::NoHfan && variant != Variant::NoHfanNoHgcn; }
    bool use_hgcn() const { return variant != Variant::NoHgcn && variant != Variant::NoHfanNoHgcn; }
    bool use_dft() const { return variant != Variant::NoDft; }
    bool bidirectional() const { return variant != Variant::Unidirectional; }

    void validate() const {
        if (input_dim == 0 || latent_dim == 0 || user_dim == 0 || hidden == 0)
            throw ContractViolation("model dimensions must be positive");
        if (hgcn_layers == 0) throw ContractViolation("hgcn_layers must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractViolation("dropout must lie in [0, 1)");
    }
};

inline nlohmann::json to_json(const ModelConfig& c) {
    return {{"input_dim", c.input_dim},
            {"latent_dim", c.latent_dim},
            {"user_dim", c.user_dim},
            {"hidden", c.hidden},
            {"hgcn_layers", c.hgcn_layers},
            {"train_curvature", c.train_curvature},
            {"freeze_context", c.freeze_context},
            {"dropout", c.dropout},
            {"variant", std::string(to_string(c.variant))},
            {"seed", c.seed},
            {"frechet_tolerance", c.frechet.tolerance},
            {"frechet_max_iterations", c.frechet.max_iterations}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.user_dim = j.at("user_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.hgcn_layers = j.at("hgcn_layers").get<std::size_t>();
    c.train_curvature = j.at("train_curvature").get<bool>();
    c.freeze_context = j.at("freeze_context").get<bool>();
    c.dropout = j.at("dropout").get<double>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.frechet.tolerance = j.at("frechet_tolerance").get<double>();
    c.frechet.max_iterations = j.at("frechet_max_iterations").get<int>();
    c.validate();
    return c;
}

/// Corpus-derived inputs that do not depend on parameters.
struct PreparedCorpus {
    const data::Corpus* corpus = nullptr;
    SparseMatrix adjacency;
    std::vector<std::vector<geo::Vec>> mixed_history;  // per user, HFAN input rows
    std::vector<geo::Vec> mean_history;                // per user, ball point of the mean embedding
    std::vector<std::vector<std::vector<double>>> utter_log;  // [tree][node] log0 of the utterance point
};

/// Two-layer perceptron on [log0 h_up; log0 h_down; x] producing two logits.
class Classifier {
public:
    Classifier() = default;
    Classifier(ParameterStore& store, const std::string& prefix, std::size_t hidden, std::size_t input_dim,
               std::mt19937_64& rng)
        : hidden_(hidden), input_dim_(input_dim) {
        W1_ = &store.add_glorot(prefix + "W1", hidden, 2 * hidden + input_dim, rng);
        b1_ = &store.add_zeros(prefix + "b1", ad::Shape::vector(hidden));
        W2_ = &store.add_glorot(prefix + "W2", 2, hidden, rng);
        b2_ = &store.add_zeros(prefix + "b2", ad::Shape::vector(2));
    }

    /// Log-probabilities [log p(non-hate), log p(hate)]. `mask` scales the
    /// tangent part (dropout); pass an invalid tensor for evaluation.
    Tensor log_probs(Tape& tape, const Tensor& up_log, const Tensor& down_log, const Tensor& x, const Tensor& mask) const {
        Tensor tangent = ad::concat({up_log, down_log});
        if (mask.valid()) tangent = tangent * mask;
        const Tensor z = ad::concat({tangent, x});
        const Tensor a = ad::relu(ad::matmul(tape.param(*W1_), z) + tape.param(*b1_));
        return ad::log_softmax(ad::matmul(tape.param(*W2_), a) + tape.param(*b2_));
    }

    ad::Parameter& W1() const { return *W1_; }
    ad::Parameter& b1() const { return *b1_; }
    ad::Parameter& W2() const { return *W2_; }
    ad::Parameter& b2() const { return *b2_; }

private:
    std::size_t hidden_ = 0;
    std::size_t input_dim_ = 0;
    ad::Parameter* W1_ = nullptr;
    ad::Parameter* b1_ = nullptr;
    ad::Parameter* W2_ = nullptr;
    ad::Parameter* b2_ = nullptr;
};

/// Per-tree forward output: log-probabilities per node.
struct TreeOutput {
    std::vector<Tensor> log_probs;
};

class CosynModel {
public:
    explicit CosynModel(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        std::mt19937_64 rng(cfg_.seed);
        const std::size_t d = cfg_.input_dim;
        std::size_t hist_dim = d;
        if (cfg_.use_user()) {
            if (cfg_.use_hfan()) {
                hfan_ = Hfan(store_, "hfan.", {d, cfg_.latent_dim, cfg_.use_dft(), false}, rng);
                hist_dim = cfg_.latent_dim;
            }
            if (cfg_.use_hgcn()) {
                HgcnConfig hc;
                hc.input_dim = hist_dim;
                hc.output_dim = cfg_.user_dim;
                hc.layers = cfg_.hgcn_layers;
                hc.train_curvature = cfg_.train_curvature;
                hc.frechet = cfg_.frechet;
                hgcn_ = Hgcn(store_, "hgcn.", hc, rng);
            } else {
                user_proj_ = &store_.add_glorot("user_proj", cfg_.user_dim, hist_dim, rng);
            }
        }
        CshtConfig cc;
        cc.utter_dim = d;
        cc.user_dim = cfg_.user_dim;
        cc.hidden = cfg_.hidden;
        cc.use_user = cfg_.use_user();
        cc.bidirectional = cfg_.bidirectional();
        csht_ = Csht(store_, "csht.", cc, rng);
        classifier_ = Classifier(store_, "cls.", cfg_.hidden, d, rng);
        if (cfg_.freeze_context)
            for (auto& p : store_)
                if (p->name.rfind("hfan.", 0) == 0 || p->name.rfind("hgcn.", 0) == 0 || p->name == "user_proj")
                    p->trainable = false;
    }

    CosynModel(const CosynModel&) = delete;
    CosynModel& operator=(const CosynModel&) = delete;

    const ModelConfig& config() const noexcept { return cfg_; }
    ParameterStore& parameters() noexcept { return store_; }
    const ParameterStore& parameters() const noexcept { return store_; }
    const Hfan& hfan() const noexcept { return hfan_; }
    const Hgcn& hgcn() const noexcept { return hgcn_; }
    const Csht& csht() const noexcept { return csht_; }
    const Classifier& classifier() const noexcept { return classifier_; }

    Space space(Tape& tape) const { return cfg_.euclidean() ? Space::flat(tape) : Space::hyperbolic(tape, 1.0); }

    PreparedCorpus prepare(const data::Corpus& corpus) const {
        if (corpus.dim != cfg_.input_dim)
            throw DataError("corpus embedding dimension " + std::to_string(corpus.dim) + " does not match model input_dim " +
                            std::to_string(cfg_.input_dim));
        PreparedCorpus p;
        p.corpus = &corpus;
        if (cfg_.use_user() && cfg_.use_hgcn()) p.adjacency = normalize_adjacency(corpus.graph.adjacency);
        if (cfg_.use_user()) {
            for (const auto& u : corpus.users) {
                if (cfg_.use_hfan()) {
                    p.mixed_history.push_back(Hfan::mix(u.history, cfg_.use_dft(), cfg_.euclidean()));
                } else {
                    geo::Vec mean = geo::Vec::Zero(static_cast<Eigen::Index>(corpus.dim));
                    for (const auto& row : u.history) mean += Eigen::Map<const geo::Vec>(row.data(), mean.size());
                    mean /= static_cast<double>(u.history.size());
                    p.mean_history.push_back(cfg_.euclidean() ? mean : geo::exp_map0(mean).coords());
                }
            }
        }
        for (const auto& tree : corpus.trees) {
            auto& logs = p.utter_log.emplace_back();
            for (const auto& node : tree.nodes) {
                const geo::Vec e = Eigen::Map<const geo::Vec>(node.embedding.data(), static_cast<Eigen::Index>(corpus.dim));
                const geo::Vec l = cfg_.euclidean() ? e : geo::log_map0(geo::exp_map0(e));
                logs.emplace_back(l.data(), l.data() + l.size());
            }
        }
        return p;
    }

    /// log0 of the final user context for every user in `needed` (all users
    /// when HGCN is active). Entries for other users are invalid tensors.
    std::vector<Tensor> user_context_log(const Space& sp, const PreparedCorpus& p, std::span<const std::size_t> needed,
                                         HgcnStats* stats = nullptr) const {
        const std::size_t n = p.corpus->users.size();
        std::vector<Tensor> out(n);
        if (!cfg_.use_user()) return out;
        if (cached_context_) {
            for (std::size_t u = 0; u < n; ++u) out[u] = sp.c.tape().constant((*cached_context_)[u]);
            return out;
        }
        Tape& tape = sp.c.tape();
        auto history_point = [&](std::size_t u) {
            if (cfg_.use_hfan()) return hfan_.forward_mixed(sp, p.mixed_history[u]);
            const auto& m = p.mean_history[u];
            return tape.constant(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
        };
        if (cfg_.use_hgcn()) {
            std::vector<Tensor> hist(n);
            for (std::size_t u = 0; u < n; ++u) hist[u] = history_point(u);
            const auto ctx = hgcn_.forward(tape, cfg_.euclidean(), p.adjacency, hist, stats);
            for (std::size_t u = 0; u < n; ++u) out[u] = sp.log0(ctx[u]);
            return out;
        }
        const Tensor w = tape.param(*user_proj_);
        for (std::size_t u : needed) {
            if (out[u].valid()) continue;
            out[u] = ad::matmul(w, sp.log0(history_point(u)));
            if (!sp.euclidean) out[u] = sp.log0(sp.exp0(out[u]));
        }
        return out;
    }

    /// Cache user contexts in plain values; used when context modules are frozen.
    void cache_context(const PreparedCorpus& p) {
        if (!cfg_.use_user()) return;
        cached_context_.reset();
        Tape tape;
        const Space sp = space(tape);
        std::vector<std::size_t> all(p.corpus->users.size());
        for (std::size_t u = 0; u < all.size(); ++u) all[u] = u;
        const auto ctx = user_context_log(sp, p, all);
        std::vector<std::vector<double>> values;
        for (const auto& t : ctx) values.emplace_back(t.values().begin(), t.values().end());
        cached_context_ = std::move(values);
    }
    void clear_context_cache() { cached_context_.reset(); }

    /// Forward pass over one tree. `dropout_rng` enables dropout on the
    /// tangent features.
    TreeOutput tree_forward(const Space& sp, const PreparedCorpus& p, std::size_t tree_index,
                            std::span<const Tensor> user_log, std::mt19937_64* dropout_rng = nullptr) const {
        Tape& tape = sp.c.tape();
        const auto& tree = p.corpus->trees.at(tree_index);
        const std::size_t n = tree.size();
        std::vector<Tensor> x_log(n), u_log;
        for (std::size_t j = 0; j < n; ++j) x_log[j] = tape.constant(p.utter_log[tree_index][j]);
        if (cfg_.use_user()) {
            u_log.resize(n);
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t u = p.corpus->user_index(tree.nodes[j].author_id);
                if (!user_log[u].valid()) throw ContractViolation("missing user context for " + tree.nodes[j].author_id);
                u_log[j] = user_log[u];
            }
        }
        const auto states = csht_.forward(sp, tree, x_log, u_log);
        TreeOutput out;
        out.log_probs.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            Tensor mask;
            if (dropout_rng && cfg_.dropout > 0.0) {
                std::bernoulli_distribution keep(1.0 - cfg_.dropout);
                std::vector<double> m(2 * cfg_.hidden);
                for (double& v : m) v = keep(*dropout_rng) ? 1.0 / (1.0 - cfg_.dropout) : 0.0;
                mask = tape.constant(std::move(m), ad::Shape::vector(2 * cfg_.hidden));
            }
            const Tensor x = tape.constant(std::span<const double>(tree.nodes[j].embedding));
            out.log_probs.push_back(
                classifier_.log_probs(tape, sp.log0(states.up[j].h), sp.log0(states.down[j].h), x, mask));
        }
        return out;
    }

    /// Users authoring any node of the given trees.
    std::vector<std::size_t> authors(const PreparedCorpus& p, std::span<const std::size_t> trees) const {
        std::vector<std::size_t> out;
        for (std::size_t t : trees)
            for (const auto& node : p.corpus->trees.at(t).nodes) out.push_back(p.corpus->user_index(node.author_id));
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// P(hate) for every node of every tree, indexed [tree][node].
    std::vector<std::vector<double>> predict(const PreparedCorpus& p) const {
        std::vector<std::size_t> all(p.corpus->trees.size());
        for (std::size_t t = 0; t < all.size(); ++t) all[t] = t;
        return predict(p, all);
    }

    std::vector<std::vector<double>> predict(const PreparedCorpus& p, std::span<const std::size_t> trees) const {
        std::vector<std::vector<double>> out(p.corpus->trees.size());
        Tape ctx_tape;
        const Space ctx_sp = space(ctx_tape);
        const auto needed = authors(p, trees);
        const auto ctx = user_context_log(ctx_sp, p, needed);
        std::vector<std::vector<double>> ctx_values(ctx.size());
        for (std::size_t u = 0; u < ctx.size(); ++u)
            if (ctx[u].valid()) ctx_values[u].assign(ctx[u].values().begin(), ctx[u].values().end());
        for (std::size_t t : trees) {
            Tape tape;
            const Space sp = space(tape);
            std::vector<Tensor> user_log(ctx.size());
            if (cfg_.use_user())
                for (std::size_t u : authors(p, std::span<const std::size_t>(&t, 1))) user_log[u] = tape.constant(ctx_values[u]);
            const auto res = tree_forward(sp, p, t, user_log);
            auto& probs = out[t];
            for (const auto& lp : res.log_probs) probs.push_back(std::exp(lp[1]));
        }
        return out;
    }

private:
    ModelConfig cfg_;
    ParameterStore store_;
    Hfan hfan_;
    Hgcn hgcn_;
    ad::Parameter* user_proj_ = nullptr;
    Csht csht_;
    Classifier classifier_;
    std::optional<std::vector<std::vector<double>>> cached_context_;
};

}  // namespace hypersyn::model
