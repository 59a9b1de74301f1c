#pragma once

// Embedding-only logistic probe: fit on labelled train utterances, score
// implicit-hate positives against non-hateful negatives by ROC AUC.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hypersyn/data.hpp"

namespace hypersyn::testing {

/// Mann-Whitney AUC with ties counted half.
inline double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    if (pos.empty() || neg.empty()) return 0.5;
    std::vector<std::pair<double, int>> all;
    for (double s : pos) all.emplace_back(s, 1);
    for (double s : neg) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end());
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        const double avg = 0.5 * static_cast<double>(i + j + 1);  // 1-based ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (all[k].second) rank_sum += avg;
        i = j;
    }
    const double np = static_cast<double>(pos.size()), nn = static_cast<double>(neg.size());
    return (rank_sum - np * (np + 1) / 2) / (np * nn);
}

/// L2-regularised logistic regression by Newton's method.
inline Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double l2 = 1e-3,
                                    int iterations = 50) {
    const Eigen::Index n = X.rows(), d = X.cols() + 1;
    Eigen::MatrixXd A(n, d);
    A << X, Eigen::VectorXd::Ones(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd p = ((-(A * w)).array().exp() + 1.0).inverse().matrix();
        const Eigen::VectorXd g = A.transpose() * (p - y) + l2 * w;
        Eigen::MatrixXd H = A.transpose() * (p.array() * (1.0 - p.array())).matrix().asDiagonal() * A;
        H.diagonal().array() += l2;
        const Eigen::VectorXd step = H.ldlt().solve(g);
        w -= step;
        if (step.norm() < 1e-10) break;
    }
    return w;
}

struct ProbeResult {
    double auc = 0.5;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Train on hate labels of train-split utterances; AUC on `split`
/// implicit-hate (or explicit-hate) versus non-hateful utterances.
inline ProbeResult implicit_probe_auc(const data::Corpus& corpus, data::Split split = data::Split::Test,
                                      bool implicit_positives = true) {
    std::vector<const data::Utterance*> train;
    for (const auto& t : corpus.trees)
        for (const auto& u : t.nodes)
            if (u.split == data::Split::Train) train.push_back(&u);
    Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(corpus.dim));
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        for (std::size_t j = 0; j < corpus.dim; ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = train[i]->embedding[j];
        y(static_cast<Eigen::Index>(i)) = train[i]->label_hate;
    }
    const Eigen::VectorXd w = fit_logistic(X, y);
    auto score = [&](const data::Utterance& u) {
        double s = w(static_cast<Eigen::Index>(corpus.dim));
        for (std::size_t j = 0; j < corpus.dim; ++j) s += w(static_cast<Eigen::Index>(j)) * u.embedding[j];
        return s;
    };
    std::vector<double> pos, neg;
    for (const auto& t : corpus.trees)
        for (const auto& u : t.nodes) {
            if (u.split != split) continue;
            if (u.label_hate == 0) neg.push_back(score(u));
            else if (u.is_implicit() == implicit_positives) pos.push_back(score(u));
        }
    return {roc_auc(pos, neg), pos.size(), neg.size()};
}

}  // namespace hypersyn::testing
