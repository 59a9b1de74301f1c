#pragma once

// Hyperbolic graph convolution over the social graph. Each layer maps every
// node through W (Mobius matrix-vector product at the incoming curvature),
// aggregates the closed neighbourhood by a Frechet mean weighted with the
// normalized adjacency row, and applies exp0 at the outgoing curvature after
// a ReLU in the tangent space.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/geometry.hpp"
#include "hypersyn/hfan.hpp"
#include "hypersyn/hyperbolic.hpp"
#include "hypersyn/optim.hpp"

namespace hypersyn::model {

/// Row-sparse symmetric matrix: rows[i] lists (column, value) by ascending column.
struct SparseMatrix {
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;

    std::size_t size() const noexcept { return rows.size(); }
    double at(std::size_t i, std::size_t j) const {
        for (const auto& [k, v] : rows[i])
            if (k == j) return v;
        return 0.0;
    }
};

/// D^-1/2 (A + I) D^-1/2 for a simple undirected graph given by sorted
/// adjacency lists; D is the degree matrix of A + I.
inline SparseMatrix normalize_adjacency(const std::vector<std::vector<std::size_t>>& adjacency) {
    if (adjacency.empty()) throw ContractViolation("normalize_adjacency: empty graph");
    const std::size_t n = adjacency.size();
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adjacency[i].size() + 1));
    SparseMatrix out;
    out.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& row = out.rows[i];
        bool self_done = false;
        for (std::size_t j : adjacency[i]) {
            if (j >= n) throw ContractViolation("normalize_adjacency: neighbour out of range");
            if (!self_done && j > i) {
                row.emplace_back(i, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
                self_done = true;
            }
            if (j != i) row.emplace_back(j, inv_sqrt_deg[i] * inv_sqrt_deg[j]);
        }
        if (!self_done) row.emplace_back(i, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
    }
    return out;
}

struct HgcnConfig {
    std::size_t input_dim = 16;
    std::size_t output_dim = 16;
    std::size_t layers = 2;
    bool train_curvature = false;  // intermediate curvatures; the end points stay at -1
    geo::FrechetOptions frechet{};
};

struct HgcnStats {
    std::size_t means = 0;
    std::size_t fallbacks = 0;
    int max_iterations = 0;
};

class Hgcn {
public:
    Hgcn() = default;

    Hgcn(ParameterStore& store, const std::string& prefix, const HgcnConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        if (cfg.layers == 0) throw ContractViolation("hgcn: need at least one layer");
        for (std::size_t i = 0; i < cfg.layers; ++i) {
            const std::size_t in = i == 0 ? cfg.input_dim : cfg.output_dim;
            weights_.push_back(&store.add_glorot(prefix + "W" + std::to_string(i + 1), cfg.output_dim, in, rng));
        }
        for (std::size_t i = 1; i < cfg.layers; ++i) {
            auto& p = store.add(prefix + "curvature_raw" + std::to_string(i), ad::Shape::scalar(), {kSoftplusOne});
            p.trainable = cfg.train_curvature;
            curvature_raw_.push_back(&p);
        }
    }

    const HgcnConfig& config() const noexcept { return cfg_; }
    ad::Parameter& weight(std::size_t layer) const { return *weights_.at(layer); }
    ad::Parameter& curvature_raw(std::size_t boundary) const { return *curvature_raw_.at(boundary - 1); }

    /// |curvature| at layer boundary k (0 = input, layers = output).
    Tensor curvature(Tape& tape, std::size_t k) const {
        if (k == 0 || k == cfg_.layers) return tape.scalar(1.0);
        return ad::softplus(tape.param(*curvature_raw_[k - 1]));
    }

    /// One layer; `layer` is zero-based.
    std::vector<Tensor> layer(Tape& tape, bool euclidean, const SparseMatrix& adj, std::span<const Tensor> inputs,
                              std::size_t layer, HgcnStats* stats = nullptr) const {
        if (inputs.size() != adj.size())
            throw ContractViolation("hgcn: " + std::to_string(inputs.size()) + " input vectors for " +
                                    std::to_string(adj.size()) + " vertices");
        const Space in = euclidean ? Space::flat(tape) : Space{curvature(tape, layer), false};
        const Space out = euclidean ? in : Space{curvature(tape, layer + 1), false};
        const Tensor w = tape.param(*weights_[layer]);
        std::vector<Tensor> mapped;
        mapped.reserve(inputs.size());
        for (const Tensor& x : inputs) mapped.push_back(in.matvec(w, x));

        std::vector<Tensor> result;
        result.reserve(inputs.size());
        std::vector<Tensor> points;
        std::vector<double> weights;
        for (std::size_t v = 0; v < adj.size(); ++v) {
            points.clear();
            weights.clear();
            for (const auto& [u, a] : adj.rows[v]) {
                if (a == 0.0) continue;
                points.push_back(mapped[u]);
                weights.push_back(a);
            }
            const auto fm = in.frechet(points, weights, cfg_.frechet);
            if (stats) {
                ++stats->means;
                stats->fallbacks += fm.fallback ? 1 : 0;
                stats->max_iterations = std::max(stats->max_iterations, fm.iterations);
            }
            result.push_back(out.exp0(ad::relu(in.log0(fm.mean))));
        }
        return result;
    }

    std::vector<Tensor> forward(Tape& tape, bool euclidean, const SparseMatrix& adj, std::span<const Tensor> inputs,
                                HgcnStats* stats = nullptr) const {
        std::vector<Tensor> o(inputs.begin(), inputs.end());
        for (std::size_t i = 0; i < cfg_.layers; ++i) o = layer(tape, euclidean, adj, o, i, stats);
        return o;
    }

private:
    HgcnConfig cfg_;
    std::vector<ad::Parameter*> weights_;
    std::vector<ad::Parameter*> curvature_raw_;
};

}  // namespace hypersyn::model
