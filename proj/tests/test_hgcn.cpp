#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hypersyn/graph_analysis.hpp"
#include "hypersyn/hgcn.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace ad = hypersyn::ad;
namespace oracle = hypersyn::oracle;
using ad::Tape;
using ad::Tensor;
using hypersyn::ParameterStore;
using hypersyn::model::Hgcn;
using hypersyn::model::HgcnConfig;
using hypersyn::model::normalize_adjacency;
using oracle::LVec;
using Adjacency = std::vector<std::vector<std::size_t>>;

namespace {

std::vector<double> ball_point(std::mt19937_64& rng, std::size_t n, double r_max) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.05, r_max);
    std::vector<double> v(n);
    double s = 0.0;
    for (double& x : v) {
        x = g(rng);
        s += x * x;
    }
    const double r = u(rng) / std::sqrt(s);
    for (double& x : v) x *= r;
    return v;
}

Adjacency from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    hypersyn::graph::Graph g(n);
    for (auto [a, b] : edges) g.add_edge(a, b);
    return g.adj;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_diff(std::span<const double> a, const LVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
    return m;
}

std::vector<Tensor> constants(Tape& tape, const std::vector<std::vector<double>>& xs) {
    std::vector<Tensor> out;
    for (const auto& x : xs) out.push_back(tape.constant(x, ad::Shape::vector(x.size())));
    return out;
}

void set_identity(ad::Parameter& w) {
    const std::size_t n = w.shape[0];
    std::fill(w.value.begin(), w.value.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) w.value[i * n + i] = 1.0;
}

const hypersyn::geo::FrechetOptions kTight{.tolerance = 1e-12, .max_iterations = 100};

}  // namespace

TEST(NormalizeAdjacency, HandComputedExamples) {
    const auto two = normalize_adjacency(from_edges(2, {{0, 1}}));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(two.at(i, j), 0.5);

    const auto single = normalize_adjacency(Adjacency(1));
    EXPECT_DOUBLE_EQ(single.at(0, 0), 1.0);

    const auto star = normalize_adjacency(from_edges(4, {{0, 1}, {0, 2}, {0, 3}}));
    for (std::size_t leaf = 1; leaf < 4; ++leaf) {
        EXPECT_NEAR(star.at(0, leaf), 1.0 / std::sqrt(8.0), 1e-15);
        EXPECT_NEAR(star.at(0, leaf), 0.3536, 5e-5);
        EXPECT_DOUBLE_EQ(star.at(leaf, leaf), 0.5);
    }
    EXPECT_DOUBLE_EQ(star.at(0, 0), 0.25);
    EXPECT_EQ(star.at(1, 2), 0.0);
    EXPECT_THROW(normalize_adjacency({}), hypersyn::ContractViolation);
}

TEST(NormalizeAdjacency, SymmetricWithSortedRows) {
    std::mt19937_64 rng(51);
    const auto g = hypersyn::graph::barabasi_albert(40, 2, rng);
    const auto a = normalize_adjacency(g.adj);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(std::is_sorted(a.rows[i].begin(), a.rows[i].end()));
        EXPECT_EQ(a.rows[i].size(), g.adj[i].size() + 1);
        for (const auto& [j, v] : a.rows[i]) EXPECT_EQ(v, a.at(j, i));
    }
}

TEST(Hgcn, IsolatedNodeWithIdentityWeightsIsFixed) {
    ParameterStore store;
    std::mt19937_64 rng(52);
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 3, .output_dim = 3, .layers = 1}, rng);
    set_identity(hgcn.weight(0));
    const std::vector<double> x{0.2, 0.0, 0.5};  // nonnegative tangent coordinates
    Tape tape;
    const auto out = hgcn.forward(tape, false, normalize_adjacency(Adjacency(1)), constants(tape, {x}));
    EXPECT_LT(max_diff(out[0].values(), x), 1e-15);
}

TEST(Hgcn, IdenticalConnectedNodesStayPut) {
    ParameterStore store;
    std::mt19937_64 rng(53);
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 2, .output_dim = 2, .layers = 1}, rng);
    set_identity(hgcn.weight(0));
    const std::vector<double> x{0.3, 0.4};
    Tape tape;
    const auto out = hgcn.forward(tape, false, normalize_adjacency(from_edges(2, {{0, 1}})), constants(tape, {x, x}));
    for (const auto& o : out) EXPECT_LT(max_diff(o.values(), x), 1e-15);
}

TEST(Hgcn, OneLayerMatchesStraightLineReference) {
    for (std::uint64_t seed : {54u, 55u, 56u}) {
        std::mt19937_64 rng(seed);
        ParameterStore store;
        const Hgcn hgcn(store, "hgcn.", {.input_dim = 3, .output_dim = 4, .layers = 1, .frechet = kTight}, rng);
        const Adjacency adj = from_edges(4, {{0, 1}, {1, 2}, {1, 3}, {2, 3}});
        std::vector<std::vector<double>> xs;
        for (int i = 0; i < 4; ++i) xs.push_back(ball_point(rng, 3, 0.8));
        Tape tape;
        const auto out = hgcn.forward(tape, false, normalize_adjacency(adj), constants(tape, xs));

        // reference: mapped_i = exp0(W log0 x_i); Karcher mean over the closed
        // neighbourhood weighted by 1/sqrt(deg_i deg_j) (degrees with self loops);
        // then exp0(relu(log0(.)))
        const auto& w = hgcn.weight(0);
        std::vector<std::vector<double>> wm(4, std::vector<double>(3));
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j) wm[i][j] = w.value[i * 3 + j];
        std::vector<LVec> mapped;
        for (const auto& x : xs) mapped.push_back(oracle::exp0(oracle::matvec(wm, oracle::log0(oracle::to_l(x)))));
        for (std::size_t v = 0; v < 4; ++v) {
            std::vector<std::size_t> hood = adj[v];
            hood.push_back(v);
            std::vector<LVec> pts;
            std::vector<long double> wts;
            for (std::size_t u : hood) {
                pts.push_back(mapped[u]);
                wts.push_back(1.0L / std::sqrt(static_cast<long double>((adj[v].size() + 1) * (adj[u].size() + 1))));
            }
            LVec t = oracle::log0(oracle::karcher_mean(pts, wts));
            for (auto& c : t) c = std::max(c, 0.0L);
            EXPECT_LT(max_diff(out[v].values(), oracle::exp0(t)), 1e-9) << "seed " << seed << " node " << v;
        }
    }
}

TEST(Hgcn, RelabelingPermutesOutputs) {
    std::mt19937_64 rng(57);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 3, .output_dim = 3, .layers = 2}, rng);
    const auto g = hypersyn::graph::barabasi_albert(12, 2, rng);
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < g.size(); ++i) xs.push_back(ball_point(rng, 3, 0.8));

    std::vector<std::size_t> perm(g.size());  // new label of old vertex i
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    hypersyn::graph::Graph h(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j : g.adj[i]) h.add_edge(perm[i], perm[j]);
    std::vector<std::vector<double>> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[perm[i]] = xs[i];

    Tape tape;
    const auto a = hgcn.forward(tape, false, normalize_adjacency(g.adj), constants(tape, xs));
    const auto b = hgcn.forward(tape, false, normalize_adjacency(h.adj), constants(tape, ys));
    for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_LT(max_diff(a[i].values(), b[perm[i]].values()), 1e-12);
}

TEST(Hgcn, GradcheckWeightsAndCurvature) {
    std::mt19937_64 rng(58);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.",
                    {.input_dim = 3, .output_dim = 3, .layers = 2, .train_curvature = true, .frechet = kTight}, rng);
    hgcn.curvature_raw(1).value = {0.3};
    const Adjacency adj = from_edges(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}});
    const auto norm = normalize_adjacency(adj);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < 4; ++i) xs.push_back(ball_point(rng, 3, 0.7));
    const auto r = hypersyn::testing::check_params(
        [&](Tape& tape) {
            const auto out = hgcn.forward(tape, false, norm, constants(tape, xs));
            Tensor loss = hypersyn::testing::probe_loss(tape, out[0], 1);
            for (std::size_t i = 1; i < out.size(); ++i) loss = loss + hypersyn::testing::probe_loss(tape, out[i], i + 1);
            return loss;
        },
        store, {&hgcn.weight(0), &hgcn.weight(1), &hgcn.curvature_raw(1)});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Hgcn, GradientFlowsToInputs) {
    std::mt19937_64 rng(59);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 3, .output_dim = 2, .layers = 1, .frechet = kTight}, rng);
    const auto norm = normalize_adjacency(from_edges(3, {{0, 1}, {1, 2}}));
    std::vector<std::vector<double>> xs;
    std::vector<ad::Shape> shapes;
    for (int i = 0; i < 3; ++i) {
        xs.push_back(ball_point(rng, 3, 0.7));
        shapes.push_back(ad::Shape::vector(3));
    }
    const auto r = hypersyn::testing::check_inputs(
        [&](Tape& tape, std::span<const Tensor> in) {
            const auto out = hgcn.forward(tape, false, norm, in);
            return hypersyn::testing::probe_loss(tape, ad::concat(std::span<const Tensor>(out)));
        },
        xs, shapes);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Hgcn, OutputsInsideBallAndStatsReported) {
    std::mt19937_64 rng(60);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 4, .output_dim = 4, .layers = 2}, rng);
    const auto g = hypersyn::graph::barabasi_albert(50, 2, rng);
    std::vector<std::vector<double>> xs;
    for (std::size_t i = 0; i < g.size(); ++i) xs.push_back(ball_point(rng, 4, 0.99));
    Tape tape;
    hypersyn::model::HgcnStats stats;
    const auto out = hgcn.forward(tape, false, normalize_adjacency(g.adj), constants(tape, xs), &stats);
    for (const auto& o : out) EXPECT_LT(ad::norm(o).item(), 1.0 - hypersyn::geo::kBallEps + 1e-15);
    EXPECT_EQ(stats.means, 100u);
    EXPECT_EQ(stats.fallbacks, 0u);
}

TEST(Hgcn, EuclideanModeIsWeightedMeanThenRelu) {
    std::mt19937_64 rng(61);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 2, .output_dim = 2, .layers = 1}, rng);
    const auto& w = hgcn.weight(0).value;
    const std::vector<std::vector<double>> xs{{0.5, -1.0}, {2.0, 0.3}};
    Tape tape;
    const auto out = hgcn.forward(tape, true, normalize_adjacency(from_edges(2, {{0, 1}})), constants(tape, xs));
    for (std::size_t k = 0; k < 2; ++k) {
        double mean = 0.0;
        for (const auto& x : xs) mean += 0.5 * (w[k * 2] * x[0] + w[k * 2 + 1] * x[1]);
        EXPECT_NEAR(out[0][k], std::max(mean, 0.0), 1e-15);
        EXPECT_NEAR(out[1][k], std::max(mean, 0.0), 1e-15);
    }
}

TEST(Hgcn, MissingVertexVectorRejected) {
    std::mt19937_64 rng(62);
    ParameterStore store;
    const Hgcn hgcn(store, "hgcn.", {.input_dim = 2, .output_dim = 2, .layers = 1}, rng);
    Tape tape;
    EXPECT_THROW(hgcn.forward(tape, false, normalize_adjacency(from_edges(3, {{0, 1}})), constants(tape, {{0.1, 0.1}})),
                 hypersyn::ContractViolation);
    EXPECT_THROW(Hgcn(store, "x.", {.layers = 0}, rng), hypersyn::ContractViolation);
}
