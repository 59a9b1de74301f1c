#pragma once

// Planted-signal corpus generator. Users fall into latent communities, with
// hateful users concentrated in communities {0, 1} according to `homophily`;
// the social graph grows by community-biased preferential attachment.
// Conversation trees grow by preferential attachment on reply targets.
//
// Labels: hateful authors replying to hate keep the thread hateful, and with
// probability `context_sensitivity` do so implicitly. An implicit utterance's
// embedding is drawn exactly like a non-hate utterance (including its
// community component), so only author and parent context reveal it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hypersyn/data.hpp"
#include "hypersyn/errors.hpp"
#include "hypersyn/graph_analysis.hpp"

namespace hypersyn::synthetic {

struct SyntheticConfig {
    std::size_t n_users = 300;
    std::size_t n_trees = 500;
    std::size_t dim = 16;
    std::uint64_t seed = 7;
    double hateful_fraction = 0.35;
    double homophily = 0.8;
    double context_sensitivity = 0.9;

    std::size_t communities = 4;
    std::size_t attachment = 2;  // BA edges per new user
    double mean_tree_size = 6.0;
    std::size_t max_tree_size = 40;
    std::size_t history_min = 3;
    std::size_t history_max = 8;
    double hateful_activity = 3.0;  // posting rate relative to other users
    double label_scale = 0.6;
    double community_scale = 0.4;
    double noise = 0.2;
    double train_fraction = 0.70;
    double val_fraction = 0.15;

    void validate() const {
        auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
        if (n_users <= attachment + 1) throw ContractViolation("synthetic: n_users must exceed attachment + 1");
        if (n_trees == 0) throw ContractViolation("synthetic: n_trees must be positive");
        if (communities < 2) throw ContractViolation("synthetic: need at least 2 communities");
        if (dim < communities + 1) throw ContractViolation("synthetic: dim must be at least communities + 1");
        if (!unit(hateful_fraction) || !unit(homophily) || !unit(context_sensitivity))
            throw ContractViolation("synthetic: hateful_fraction, homophily and context_sensitivity must lie in [0, 1]");
        if (!(mean_tree_size >= 1.0) || max_tree_size == 0) throw ContractViolation("synthetic: invalid tree size");
        if (history_min == 0 || history_max < history_min) throw ContractViolation("synthetic: invalid history range");
        if (!(hateful_activity > 0.0) || !(noise >= 0.0)) throw ContractViolation("synthetic: invalid scale parameter");
        if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction >= 1.0)
            throw ContractViolation("synthetic: invalid split fractions");
    }
};

/// Generated corpus plus the latent ground truth used to plant it.
struct SyntheticCorpus {
    data::Corpus corpus;
    std::vector<int> hateful;    // per user, in corpus user order
    std::vector<int> community;  // per user
};

inline std::string user_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "u%05zu", i);
    return buf;
}
inline std::string tree_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%05zu", i);
    return buf;
}
inline std::string node_id(std::size_t tree, std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t%05zu_%04zu", tree, k);
    return buf;
}

/// Grow a tree of n nodes; node k > 0 attaches to an earlier node with
/// probability proportional to (its child count + 1). Returns parent indices
/// (parent[0] = -1).
inline std::vector<long> grow_preferential_tree(std::size_t n, std::mt19937_64& rng) {
    std::vector<long> parent(n, -1);
    std::vector<std::size_t> pool;  // node j appears (children_j + 1) times
    if (n > 0) pool.push_back(0);
    for (std::size_t k = 1; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t p = pool[pick(rng)];
        parent[k] = static_cast<long>(p);
        pool.push_back(p);
        pool.push_back(k);
    }
    return parent;
}

inline std::vector<long> out_degrees(const std::vector<long>& parent) {
    std::vector<long> deg(parent.size(), 0);
    for (long p : parent)
        if (p >= 0) ++deg[static_cast<std::size_t>(p)];
    return deg;
}

inline graph::Graph to_graph(const data::SocialGraph& g) {
    graph::Graph out(g.vertex_count());
    out.adj = g.adjacency;
    return out;
}

inline graph::Graph to_graph(const data::ConversationTree& t) {
    graph::Graph out(t.size());
    for (const auto& e : t.edges) out.add_edge(e.parent, e.child);
    return out;
}

inline SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto coin = [&](double p) { return unif(rng) < p; };
    const std::size_t n = cfg.n_users;
    const std::size_t K = cfg.communities;

    // Users: hatefulness, then community.
    std::vector<int> hateful(n, 0);
    {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const auto count = static_cast<std::size_t>(std::lround(cfg.hateful_fraction * static_cast<double>(n)));
        for (std::size_t i = 0; i < count; ++i) hateful[order[i]] = 1;
    }
    const std::size_t half = K / 2;
    std::vector<int> community(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (coin(cfg.homophily)) {
            // hateful users gather in the first half of the communities, others in the second
            std::uniform_int_distribution<std::size_t> pick(0, hateful[i] ? half - 1 : K - half - 1);
            community[i] = static_cast<int>(hateful[i] ? pick(rng) : half + pick(rng));
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, K - 1);
            community[i] = static_cast<int>(pick(rng));
        }
    }

    // Social graph: community-biased preferential attachment.
    std::vector<data::SocialEdge> social;
    {
        const std::size_t m = cfg.attachment;
        std::vector<std::size_t> ends;
        std::vector<std::vector<std::size_t>> comm_ends(K);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        std::uniform_int_distribution<int> rel(0, 3);
        auto link = [&](std::size_t a, std::size_t b) {
            seen.emplace(std::min(a, b), std::max(a, b));
            ends.push_back(a);
            ends.push_back(b);
            comm_ends[static_cast<std::size_t>(community[a])].push_back(a);
            comm_ends[static_cast<std::size_t>(community[b])].push_back(b);
            const bool flip = coin(0.5);
            social.push_back({user_id(flip ? b : a), user_id(flip ? a : b), static_cast<data::SocialRelation>(rel(rng))});
        };
        for (std::size_t a = 0; a <= m; ++a)
            for (std::size_t b = a + 1; b <= m; ++b) link(a, b);
        for (std::size_t v = m + 1; v < n; ++v) {
            std::set<std::size_t> targets;
            int guard = 0;
            while (targets.size() < m && guard++ < 1000) {
                const auto& local = comm_ends[static_cast<std::size_t>(community[v])];
                const auto& pool = (!local.empty() && coin(cfg.homophily)) ? local : ends;
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                const std::size_t t = pool[pick(rng)];
                if (t != v) targets.insert(t);
            }
            for (std::size_t t : targets)
                if (!seen.count({std::min(v, t), std::max(v, t)})) link(v, t);
        }
    }

    // Authors are sampled by activity.
    std::vector<double> activity(n);
    for (std::size_t i = 0; i < n; ++i) activity[i] = hateful[i] ? cfg.hateful_activity : 1.0;
    std::discrete_distribution<std::size_t> pick_author(activity.begin(), activity.end());

    // Tree structure and labels, parents before children.
    struct Node {
        std::size_t tree, k;
        long parent;
        std::size_t author;
        int hate;
        bool implicit;
    };
    std::vector<Node> nodes;
    std::geometric_distribution<std::size_t> extra(1.0 / cfg.mean_tree_size);
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        const std::size_t size = std::min(cfg.max_tree_size, 1 + extra(rng));
        const auto parent = grow_preferential_tree(size, rng);
        const std::size_t base = nodes.size();
        for (std::size_t k = 0; k < size; ++k) {
            const std::size_t a = pick_author(rng);
            Node nd{t, k, parent[k], a, 0, false};
            if (parent[k] < 0) {
                nd.hate = coin(hateful[a] ? 0.8 : 0.05);
            } else {
                const bool parent_hate = nodes[base + static_cast<std::size_t>(parent[k])].hate == 1;
                if (hateful[a] && parent_hate) {
                    nd.hate = coin(0.95);
                    nd.implicit = nd.hate && coin(cfg.context_sensitivity);
                } else if (hateful[a]) {
                    nd.hate = coin(0.6);
                } else {
                    nd.hate = coin(0.05);
                }
            }
            nodes.push_back(nd);
        }
    }

    // Embeddings: label direction e_0, community directions e_1..e_K.
    auto embed = [&](int sign, int comm) {
        std::vector<double> v(cfg.dim);
        for (double& x : v) x = cfg.noise * gauss(rng);
        v[0] += cfg.label_scale * sign;
        v[1 + static_cast<std::size_t>(comm)] += cfg.community_scale;
        return v;
    };
    std::vector<std::size_t> non_hate;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!nodes[i].hate) non_hate.push_back(i);

    std::vector<data::Utterance> utterances;
    utterances.reserve(nodes.size());
    for (const auto& nd : nodes) {
        data::Utterance u;
        u.id = node_id(nd.tree, nd.k);
        u.tree_id = tree_id(nd.tree);
        if (nd.parent >= 0) u.parent_id = node_id(nd.tree, static_cast<std::size_t>(nd.parent));
        u.author_id = user_id(nd.author);
        u.label_hate = nd.hate;
        if (nd.hate) u.label_implicit = nd.implicit ? 1 : 0;
        int comm = community[nd.author];
        if (nd.implicit && !non_hate.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, non_hate.size() - 1);
            comm = community[nodes[non_hate[pick(rng)]].author];
        }
        u.embedding = embed(nd.hate && !nd.implicit ? 1 : -1, comm);
        utterances.push_back(std::move(u));
    }

    // Splits by tree.
    {
        std::vector<std::size_t> order(cfg.n_trees);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::lround(cfg.train_fraction * static_cast<double>(cfg.n_trees)));
        const auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(cfg.n_trees)));
        std::vector<data::Split> split(cfg.n_trees, data::Split::Test);
        for (std::size_t i = 0; i < order.size(); ++i)
            split[order[i]] = i < n_train ? data::Split::Train : i < n_train + n_val ? data::Split::Val : data::Split::Test;
        for (std::size_t i = 0; i < nodes.size(); ++i) utterances[i].split = split[nodes[i].tree];
    }

    // Histories: explicit utterances at a user-specific hate rate.
    std::vector<data::UserRecord> users(n);
    for (std::size_t i = 0; i < n; ++i) {
        users[i].id = user_id(i);
        std::uniform_int_distribution<std::size_t> len(cfg.history_min, cfg.history_max);
        const std::size_t s = len(rng);
        const double rate = hateful[i] ? 0.6 + 0.3 * unif(rng) : 0.1 * unif(rng);
        for (std::size_t j = 0; j < s; ++j) users[i].history.push_back(embed(coin(rate) ? 1 : -1, community[i]));
    }

    SyntheticCorpus out;
    out.corpus = data::assemble_corpus(std::move(utterances), std::move(users), std::move(social), "synthetic");
    out.hateful = std::move(hateful);
    out.community = std::move(community);
    return out;
}

}  // namespace hypersyn::synthetic
