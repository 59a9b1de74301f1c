#pragma once

// Corpus schema: conversation trees of utterances with precomputed
// embeddings, user histories, and a typed social graph. Loading is total:
// either every invariant holds or a DataError names the file, line and field.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypersyn/errors.hpp"

namespace hypersyn::data {

enum class Split { Train, Val, Test };
enum class TreeRelation { ParentComment, CommentReply, ReplyReply };
enum class SocialRelation { Retweet, Mention, Reply, Follow };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

inline std::optional<Split> parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    return std::nullopt;
}

inline const char* to_string(SocialRelation r) {
    switch (r) {
        case SocialRelation::Retweet: return "retweet";
        case SocialRelation::Mention: return "mention";
        case SocialRelation::Reply: return "reply";
        case SocialRelation::Follow: return "follow";
    }
    return "?";
}

inline std::optional<SocialRelation> parse_relation(const std::string& s) {
    if (s == "retweet") return SocialRelation::Retweet;
    if (s == "mention") return SocialRelation::Mention;
    if (s == "reply") return SocialRelation::Reply;
    if (s == "follow") return SocialRelation::Follow;
    return std::nullopt;
}

inline const char* to_string(TreeRelation r) {
    switch (r) {
        case TreeRelation::ParentComment: return "parent-comment";
        case TreeRelation::CommentReply: return "comment-reply";
        case TreeRelation::ReplyReply: return "reply-reply";
    }
    return "?";
}

struct Utterance {
    std::string id;
    std::string tree_id;
    std::optional<std::string> parent_id;
    std::string author_id;
    std::vector<double> embedding;
    int label_hate = 0;
    std::optional<int> label_implicit;  // only for hateful utterances
    Split split = Split::Train;

    bool is_implicit() const { return label_hate == 1 && label_implicit.value_or(0) == 1; }
    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct TreeEdge {
    std::size_t parent = 0;
    std::size_t child = 0;
    TreeRelation relation = TreeRelation::ParentComment;
    friend bool operator==(const TreeEdge&, const TreeEdge&) = default;
};

/// Rooted conversation tree. Nodes are stored in ascending id order and all
/// derived indices (children, levels) keep that order.
struct ConversationTree {
    std::string id;
    std::vector<Utterance> nodes;
    std::vector<TreeEdge> edges;
    std::size_t root = 0;
    std::vector<std::optional<std::size_t>> parent;
    std::vector<std::vector<std::size_t>> children;
    std::vector<int> depth;
    std::vector<std::vector<std::size_t>> levels;

    std::size_t size() const noexcept { return nodes.size(); }
    friend bool operator==(const ConversationTree&, const ConversationTree&) = default;

    /// Validate structure and derive indices. `source` names the originating
    /// file for error messages.
    static ConversationTree build(std::string id, std::vector<Utterance> nodes, const std::string& source = "utterances") {
        ConversationTree t;
        t.id = std::move(id);
        std::sort(nodes.begin(), nodes.end(), [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
        t.nodes = std::move(nodes);
        const std::size_t n = t.nodes.size();
        if (n == 0) throw DataError(source, 0, "tree_id", "tree " + t.id + " has no utterances");

        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < n; ++i) index.emplace(t.nodes[i].id, i);

        t.parent.assign(n, std::nullopt);
        t.children.assign(n, {});
        std::vector<std::size_t> roots;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& u = t.nodes[i];
            if (!u.parent_id) {
                roots.push_back(i);
                continue;
            }
            auto it = index.find(*u.parent_id);
            if (it == index.end())
                throw DataError(source, 0, "parent_id",
                                "utterance " + u.id + " references parent " + *u.parent_id + " outside tree " + t.id);
            if (it->second == i) throw DataError(source, 0, "parent_id", "utterance " + u.id + " is its own parent");
            t.parent[i] = it->second;
            t.children[it->second].push_back(i);
        }
        if (roots.size() != 1)
            throw DataError(source, 0, "parent_id",
                            "tree " + t.id + " has " + std::to_string(roots.size()) + " roots (expected exactly one)");
        t.root = roots.front();

        // Breadth-first from the root; unreached nodes imply a cycle.
        t.depth.assign(n, -1);
        t.depth[t.root] = 0;
        std::vector<std::size_t> queue{t.root};
        for (std::size_t q = 0; q < queue.size(); ++q)
            for (std::size_t c : t.children[queue[q]]) {
                t.depth[c] = t.depth[queue[q]] + 1;
                queue.push_back(c);
            }
        if (queue.size() != n) throw DataError(source, 0, "parent_id", "tree " + t.id + " contains a cycle");

        const int max_depth = *std::max_element(t.depth.begin(), t.depth.end());
        t.levels.assign(static_cast<std::size_t>(max_depth) + 1, {});
        for (std::size_t i = 0; i < n; ++i) t.levels[static_cast<std::size_t>(t.depth[i])].push_back(i);

        for (std::size_t i = 0; i < n; ++i) {
            if (!t.parent[i]) continue;
            const int pd = t.depth[*t.parent[i]];
            const TreeRelation rel = pd == 0 ? TreeRelation::ParentComment
                                     : pd == 1 ? TreeRelation::CommentReply
                                               : TreeRelation::ReplyReply;
            t.edges.push_back({*t.parent[i], i, rel});
        }
        return t;
    }
};

struct UserRecord {
    std::string id;
    std::vector<std::vector<double>> history;  // time-ordered, oldest first
    bool history_missing = false;              // history is a single zero embedding
    friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

struct SocialEdge {
    std::string src;
    std::string dst;
    SocialRelation relation = SocialRelation::Follow;
    friend bool operator==(const SocialEdge&, const SocialEdge&) = default;
};

/// Undirected user graph. Parallel edges collapse to one adjacency entry; the
/// raw typed edges are kept alongside.
struct SocialGraph {
    std::vector<std::string> vertices;
    std::vector<SocialEdge> edges;
    std::vector<std::vector<std::size_t>> adjacency;  // sorted, no self loops

    std::size_t vertex_count() const noexcept { return vertices.size(); }
    std::size_t edge_count() const {
        std::size_t n = 0;
        for (const auto& a : adjacency) n += a.size();
        return n / 2;
    }
    friend bool operator==(const SocialGraph&, const SocialGraph&) = default;

    static SocialGraph build(std::vector<std::string> vertices, std::vector<SocialEdge> edges,
                             const std::map<std::string, std::size_t>& index) {
        SocialGraph g;
        g.vertices = std::move(vertices);
        g.adjacency.assign(g.vertices.size(), {});
        std::vector<std::set<std::size_t>> nbrs(g.vertices.size());
        for (const auto& e : edges) {
            const std::size_t a = index.at(e.src);
            const std::size_t b = index.at(e.dst);
            if (a == b) continue;
            nbrs[a].insert(b);
            nbrs[b].insert(a);
        }
        for (std::size_t i = 0; i < nbrs.size(); ++i) g.adjacency[i].assign(nbrs[i].begin(), nbrs[i].end());
        g.edges = std::move(edges);
        return g;
    }
};

struct Corpus {
    std::vector<ConversationTree> trees;  // ascending tree id
    std::vector<UserRecord> users;        // ascending user id; index == graph vertex index
    SocialGraph graph;
    std::size_t dim = 0;

    std::size_t user_index(const std::string& id) const {
        auto it = std::lower_bound(users.begin(), users.end(), id,
                                   [](const UserRecord& u, const std::string& key) { return u.id < key; });
        if (it == users.end() || it->id != id) throw DataError("unknown user id " + id);
        return static_cast<std::size_t>(it - users.begin());
    }

    std::size_t utterance_count() const {
        std::size_t n = 0;
        for (const auto& t : trees) n += t.size();
        return n;
    }

    friend bool operator==(const Corpus& a, const Corpus& b) {
        return a.dim == b.dim && a.trees == b.trees && a.users == b.users && a.graph == b.graph;
    }
};

/// Assemble and validate a corpus from parsed records. Used by both the file
/// loader and the synthetic generator.
inline Corpus assemble_corpus(std::vector<Utterance> utterances, std::vector<UserRecord> users,
                              std::vector<SocialEdge> edges, const std::string& source = "corpus") {
    if (utterances.empty()) throw DataError(source, 0, "", "no trees");
    Corpus c;
    c.dim = utterances.front().embedding.size();
    if (c.dim == 0) throw DataError(source, 0, "vector", "empty embedding");

    std::sort(users.begin(), users.end(), [](const UserRecord& a, const UserRecord& b) { return a.id < b.id; });
    std::map<std::string, std::size_t> uindex;
    for (std::size_t i = 0; i < users.size(); ++i) {
        auto& u = users[i];
        if (!uindex.emplace(u.id, i).second) throw DataError(source, 0, "user_id", "duplicate user " + u.id);
        if (u.history.empty()) {
            u.history.assign(1, std::vector<double>(c.dim, 0.0));
            u.history_missing = true;
        }
        for (const auto& h : u.history)
            if (h.size() != c.dim)
                throw DataError(source, 0, "vectors",
                                "user " + u.id + " history dimension " + std::to_string(h.size()) + " != " +
                                    std::to_string(c.dim));
    }

    std::map<std::string, std::vector<Utterance>> by_tree;
    std::set<std::string> seen;
    for (auto& u : utterances) {
        if (!seen.insert(u.id).second) throw DataError(source, 0, "id", "duplicate utterance id " + u.id);
        if (u.embedding.size() != c.dim)
            throw DataError(source, 0, "vector", "utterance " + u.id + " embedding dimension " +
                                                     std::to_string(u.embedding.size()) + " != " + std::to_string(c.dim));
        if (!uindex.count(u.author_id))
            throw DataError(source, 0, "author_id", "utterance " + u.id + " has unknown author " + u.author_id);
        by_tree[u.tree_id].push_back(std::move(u));
    }
    for (auto& [tid, nodes] : by_tree) c.trees.push_back(ConversationTree::build(tid, std::move(nodes), source));

    for (const auto& e : edges)
        for (const auto* end : {&e.src, &e.dst})
            if (!uindex.count(*end)) throw DataError(source, 0, "src/dst", "social edge endpoint " + *end + " is not a known user");

    std::vector<std::string> vertices;
    vertices.reserve(users.size());
    for (const auto& u : users) vertices.push_back(u.id);
    c.graph = SocialGraph::build(std::move(vertices), std::move(edges), uindex);
    c.users = std::move(users);
    return c;
}

// ---------------------------------------------------------------------------
// JSONL files

struct CorpusPaths {
    std::string utterances;
    std::string embeddings;
    std::string histories;
    std::string edges;

    static CorpusPaths in_directory(const std::filesystem::path& dir) {
        return {(dir / "utterances.jsonl").string(), (dir / "embeddings.jsonl").string(),
                (dir / "user_histories.jsonl").string(), (dir / "social_edges.jsonl").string()};
    }
};

namespace detail {

template <typename F>
void for_each_json_line(const std::string& path, F&& f) {
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, "", "cannot open file");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(path, lineno, "", std::string("malformed JSON: ") + e.what());
        }
        if (!j.is_object()) throw DataError(path, lineno, "", "expected a JSON object");
        f(j, lineno);
    }
}

inline std::string require_string(const nlohmann::json& j, const char* field, const std::string& path, std::size_t line) {
    if (!j.contains(field)) throw DataError(path, line, field, "missing field");
    if (!j.at(field).is_string()) throw DataError(path, line, field, "expected a string");
    return j.at(field).get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& j, const char* field, const std::string& path,
                                                  std::size_t line) {
    if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
    if (!j.at(field).is_string()) throw DataError(path, line, field, "expected a string or null");
    return j.at(field).get<std::string>();
}

inline int require_binary(const nlohmann::json& v, const char* field, const std::string& path, std::size_t line) {
    if (!v.is_number_integer() || (v.get<long>() != 0 && v.get<long>() != 1))
        throw DataError(path, line, field, "expected 0 or 1");
    return v.get<int>();
}

inline std::vector<double> require_vector(const nlohmann::json& v, const char* field, const std::string& path,
                                          std::size_t line) {
    if (!v.is_array()) throw DataError(path, line, field, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw DataError(path, line, field, "expected an array of numbers");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw DataError(path, line, field, "non-finite value");
        out.push_back(d);
    }
    return out;
}

}  // namespace detail

/// Typed user-user edges from a social_edges.jsonl file, in file order.
inline std::vector<SocialEdge> load_social_edges(const std::string& path) {
    std::vector<SocialEdge> edges;
    detail::for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line) {
        SocialEdge e;
        e.src = detail::require_string(j, "src", path, line);
        e.dst = detail::require_string(j, "dst", path, line);
        const auto rel = parse_relation(detail::require_string(j, "relation", path, line));
        if (!rel) throw DataError(path, line, "relation", "expected retweet, mention, reply or follow");
        e.relation = *rel;
        edges.push_back(std::move(e));
    });
    return edges;
}

inline Corpus load_corpus(const CorpusPaths& paths) {
    using detail::require_string;

    std::vector<Utterance> utterances;
    std::map<std::string, std::size_t> uline;
    detail::for_each_json_line(paths.utterances, [&](const nlohmann::json& j, std::size_t line) {
        const auto& p = paths.utterances;
        Utterance u;
        u.id = require_string(j, "id", p, line);
        u.tree_id = require_string(j, "tree_id", p, line);
        u.parent_id = detail::optional_string(j, "parent_id", p, line);
        u.author_id = require_string(j, "author_id", p, line);
        if (!j.contains("label_hate")) throw DataError(p, line, "label_hate", "missing field");
        u.label_hate = detail::require_binary(j.at("label_hate"), "label_hate", p, line);
        if (j.contains("label_implicit") && !j.at("label_implicit").is_null()) {
            u.label_implicit = detail::require_binary(j.at("label_implicit"), "label_implicit", p, line);
            if (u.label_hate != 1) throw DataError(p, line, "label_implicit", "implicit label on a non-hateful utterance");
        }
        const auto split = parse_split(require_string(j, "split", p, line));
        if (!split) throw DataError(p, line, "split", "expected train, val or test");
        u.split = *split;
        if (!uline.emplace(u.id, line).second) throw DataError(p, line, "id", "duplicate utterance id " + u.id);
        utterances.push_back(std::move(u));
    });
    if (utterances.empty()) throw DataError(paths.utterances, 0, "", "no trees");

    std::map<std::string, std::vector<double>> embeddings;
    detail::for_each_json_line(paths.embeddings, [&](const nlohmann::json& j, std::size_t line) {
        const auto& p = paths.embeddings;
        const std::string id = require_string(j, "id", p, line);
        if (!j.contains("vector")) throw DataError(p, line, "vector", "missing field");
        if (!uline.count(id)) throw DataError(p, line, "id", "embedding for unknown utterance " + id);
        if (!embeddings.emplace(id, detail::require_vector(j.at("vector"), "vector", p, line)).second)
            throw DataError(p, line, "id", "duplicate embedding for " + id);
    });
    for (auto& u : utterances) {
        auto it = embeddings.find(u.id);
        if (it == embeddings.end())
            throw DataError(paths.embeddings, 0, "id", "no embedding for utterance " + u.id);
        u.embedding = std::move(it->second);
    }
    const std::size_t dim = utterances.front().embedding.size();
    for (const auto& u : utterances)
        if (u.embedding.size() != dim || dim == 0)
            throw DataError(paths.utterances, uline.at(u.id), "vector",
                            "embedding of " + u.id + " has dimension " + std::to_string(u.embedding.size()) +
                                ", expected " + std::to_string(dim));

    std::vector<UserRecord> users;
    detail::for_each_json_line(paths.histories, [&](const nlohmann::json& j, std::size_t line) {
        const auto& p = paths.histories;
        UserRecord r;
        r.id = require_string(j, "user_id", p, line);
        if (!j.contains("vectors") || !j.at("vectors").is_array()) throw DataError(p, line, "vectors", "expected an array");
        for (const auto& v : j.at("vectors")) {
            r.history.push_back(detail::require_vector(v, "vectors", p, line));
            if (r.history.back().size() != dim)
                throw DataError(p, line, "vectors", "history vector has dimension " +
                                                        std::to_string(r.history.back().size()) + ", expected " +
                                                        std::to_string(dim));
        }
        users.push_back(std::move(r));
    });

    std::vector<SocialEdge> edges = load_social_edges(paths.edges);

    // Referential checks with precise locations before structural assembly.
    std::set<std::string> user_ids;
    for (const auto& u : users)
        if (!user_ids.insert(u.id).second) throw DataError(paths.histories, 0, "user_id", "duplicate user " + u.id);
    for (const auto& u : utterances)
        if (!user_ids.count(u.author_id))
            throw DataError(paths.utterances, uline.at(u.id), "author_id", "unknown author " + u.author_id);
    for (std::size_t i = 0; i < edges.size(); ++i)
        for (const auto* end : {&edges[i].src, &edges[i].dst})
            if (!user_ids.count(*end)) throw DataError(paths.edges, i + 1, "src/dst", "unknown user " + *end);

    return assemble_corpus(std::move(utterances), std::move(users), std::move(edges), paths.utterances);
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto paths = CorpusPaths::in_directory(dir);
    auto open = [](const std::string& p) {
        std::ofstream out(p);
        if (!out) throw DataError(p, 0, "", "cannot open for writing");
        return out;
    };
    auto utt = open(paths.utterances);
    auto emb = open(paths.embeddings);
    for (const auto& t : corpus.trees)
        for (const auto& u : t.nodes) {
            nlohmann::json j = {{"id", u.id},
                                {"tree_id", u.tree_id},
                                {"parent_id", nullptr},
                                {"author_id", u.author_id},
                                {"label_hate", u.label_hate},
                                {"label_implicit", nullptr},
                                {"split", to_string(u.split)}};
            if (u.parent_id) j["parent_id"] = *u.parent_id;
            if (u.label_implicit) j["label_implicit"] = *u.label_implicit;
            utt << j.dump() << '\n';
            emb << nlohmann::json{{"id", u.id}, {"vector", u.embedding}}.dump() << '\n';
        }
    auto hist = open(paths.histories);
    for (const auto& u : corpus.users) {
        const auto vectors = u.history_missing ? std::vector<std::vector<double>>{} : u.history;
        hist << nlohmann::json{{"user_id", u.id}, {"vectors", vectors}}.dump() << '\n';
    }
    auto edges = open(paths.edges);
    for (const auto& e : corpus.graph.edges)
        edges << nlohmann::json{{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}}.dump() << '\n';
}

}  // namespace hypersyn::data
