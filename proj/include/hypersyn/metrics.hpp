#pragma once

// Hate-class precision/recall/F1 over test nodes, the implicit subset, and
// its comment/reply slices; JSON and aligned-table output.

#include <cstddef>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypersyn/data.hpp"
#include "hypersyn/errors.hpp"

namespace hypersyn::metrics {

struct Confusion {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    void add(bool predicted, bool actual) {
        if (predicted && actual) ++tp;
        else if (predicted) ++fp;
        else if (actual) ++fn;
        else ++tn;
    }
    std::size_t total() const { return tp + fp + fn + tn; }
};

struct Scores {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::size_t support = 0;  // nodes in the pool

    friend bool operator==(const Scores&, const Scores&) = default;
};

/// Hate-class scores; an empty denominator yields 0.
inline Scores score(const Confusion& c) {
    Scores s;
    s.support = c.total();
    s.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

struct MetricsReport {
    Scores overall;
    Scores implicit;
    Scores comment;  // implicit pool, depth 1
    Scores reply;    // implicit pool, depth >= 2

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Scores for nodes of `split`, thresholding P(hate) at `threshold`.
/// `probs` is indexed [tree][node] like the corpus. The implicit pool holds
/// implicit hateful nodes and every non-hateful node.
inline MetricsReport evaluate_predictions(const data::Corpus& corpus, const std::vector<std::vector<double>>& probs,
                                          data::Split split = data::Split::Test, double threshold = 0.5) {
    if (probs.size() != corpus.trees.size()) throw ContractViolation("evaluate: prediction/tree count mismatch");
    Confusion overall, implicit, comment, reply;
    bool any = false;
    for (std::size_t t = 0; t < corpus.trees.size(); ++t) {
        const auto& tree = corpus.trees[t];
        for (std::size_t j = 0; j < tree.size(); ++j) {
            const auto& node = tree.nodes[j];
            if (node.split != split) continue;
            if (probs[t].size() != tree.size()) throw ContractViolation("evaluate: missing predictions for tree " + tree.id);
            any = true;
            const bool pred = probs[t][j] >= threshold;
            const bool actual = node.label_hate == 1;
            overall.add(pred, actual);
            if (actual && !node.is_implicit()) continue;
            implicit.add(pred, actual);
            if (tree.depth[j] == 1) comment.add(pred, actual);
            if (tree.depth[j] >= 2) reply.add(pred, actual);
        }
    }
    if (!any) throw DataError("evaluate: no " + std::string(data::to_string(split)) + " utterances in corpus");
    return {score(overall), score(implicit), score(comment), score(reply)};
}

inline nlohmann::json to_json(const Scores& s) {
    return {{"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}, {"support", s.support}};
}

inline nlohmann::json to_json(const MetricsReport& r) {
    return {{"overall", to_json(r.overall)},
            {"implicit", to_json(r.implicit)},
            {"comment", to_json(r.comment)},
            {"reply", to_json(r.reply)}};
}

inline Scores scores_from_json(const nlohmann::json& j) {
    return {j.at("f1").get<double>(), j.at("precision").get<double>(), j.at("recall").get<double>(),
            j.at("support").get<std::size_t>()};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    return {scores_from_json(j.at("overall")), scores_from_json(j.at("implicit")), scores_from_json(j.at("comment")),
            scores_from_json(j.at("reply"))};
}

struct TableRow {
    std::string label;
    MetricsReport report;
};

/// Aligned plain-text table, percentages with two decimals:
/// label | Overall F1 P R | Implicit F1 P R Comment-F1 Reply-F1.
inline std::string format_table(const std::vector<TableRow>& rows, std::string_view first_header = "Model") {
    std::size_t width = first_header.size();
    for (const auto& r : rows) width = std::max(width, r.label.size());
    auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * v);
        return std::string(buf);
    };
    auto pad = [&](std::string_view s) { return std::string(s) + std::string(width - s.size(), ' '); };
    std::ostringstream out;
    out << pad("") << " | " << "         Overall          " << " | " << "                     Implicit                     "
        << "\n";
    out << pad(first_header) << " | " << "      F1" << "       P" << "       R" << "  | " << "      F1" << "       P"
        << "       R" << " Comment F1" << " Reply F1" << "\n";
    out << std::string(width, '-') << "-+-" << std::string(26, '-') << "-+-" << std::string(50, '-') << "\n";
    for (const auto& r : rows) {
        const auto& m = r.report;
        out << pad(r.label) << " | " << cell(m.overall.f1) << cell(m.overall.precision) << cell(m.overall.recall)
            << "  | " << cell(m.implicit.f1) << cell(m.implicit.precision) << cell(m.implicit.recall) << "   "
            << cell(m.comment.f1) << " " << cell(m.reply.f1) << "\n";
    }
    return out.str();
}

}  // namespace hypersyn::metrics
