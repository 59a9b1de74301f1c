#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hypersyn/hfan.hpp"
#include "hypersyn/synthetic.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace ad = hypersyn::ad;
namespace hyp = hypersyn::hyp;
namespace oracle = hypersyn::oracle;
using ad::Tape;
using ad::Tensor;
using hypersyn::ParameterStore;
using hypersyn::model::Hfan;
using hypersyn::model::HfanConfig;
using oracle::LVec;

namespace {

using History = std::vector<std::vector<double>>;
using Matrix = std::vector<std::vector<double>>;

History random_history(std::mt19937_64& rng, std::size_t S, std::size_t d, double scale = 0.5) {
    History h;
    for (std::size_t s = 0; s < S; ++s) h.push_back(hypersyn::testing::random_vector(rng, d, scale));
    return h;
}

Matrix as_matrix(const ad::Parameter& p) {
    const std::size_t rows = p.shape[0], cols = p.shape[1];
    Matrix m(rows, std::vector<double>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m[i][j] = p.value[i * cols + j];
    return m;
}

LVec as_lvec(const ad::Parameter& p) { return {p.value.begin(), p.value.end()}; }

double max_diff(std::span<const double> a, const LVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
    return m;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

LVec lmul(const LVec& a, const LVec& b) {
    LVec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

LVec lsigmoid(const LVec& a) {
    LVec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 1 / (1 + std::exp(-a[i]));
    return out;
}

/// Straight-line re-implementation of the encoder from the defining formulas.
struct Reference {
    const ParameterStore& store;
    std::string prefix;

    Matrix M(const std::string& n) const { return as_matrix(store.at(prefix + n)); }
    LVec V(const std::string& n) const { return as_lvec(store.at(prefix + n)); }

    LVec gate_pre(const std::string& g, const LVec& x, const LVec& h_for_u) const {
        using namespace oracle;
        const LVec wx = exp0(matvec(M("gru.W" + g), log0(x)));
        const LVec uh = exp0(matvec(M("gru.U" + g), log0(h_for_u)));
        return mobius_add(mobius_add(wx, uh), exp0(V("gru.b" + g)));
    }

    LVec gru(const LVec& h, const LVec& x) const {
        using namespace oracle;
        const LVec z = lsigmoid(log0(gate_pre("z", x, h)));
        const LVec r = lsigmoid(log0(gate_pre("r", x, h)));
        const LVec rh = exp0(lmul(r, log0(h)));
        const LVec cand = mobius_add(h, gate_pre("h", x, rh));
        return mobius_add(h, exp0(lmul(z, log0(mobius_add(neg(h), cand)))));
    }

    LVec forward(const History& history, bool use_dft) const {
        using namespace oracle;
        const auto S = static_cast<Eigen::Index>(history.size());
        const auto d = static_cast<Eigen::Index>(history.front().size());
        Eigen::MatrixXd x(S, d);
        for (Eigen::Index s = 0; s < S; ++s)
            for (Eigen::Index j = 0; j < d; ++j) x(s, j) = history[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
        if (use_dft) x = naive_dft2_real(x) / std::sqrt(static_cast<double>(S * d));
        std::vector<LVec> states;
        LVec h(store.at(prefix + "proj").shape[0], 0);
        for (Eigen::Index s = 0; s < S; ++s) {
            LVec row(static_cast<std::size_t>(d));
            for (Eigen::Index j = 0; j < d; ++j) row[static_cast<std::size_t>(j)] = x(s, j);
            const LVec xin = exp0(matvec(M("proj"), log0(exp0(row))));
            h = gru(h, xin);
            states.push_back(h);
        }
        // attention: alpha_i = exp(-softplus(beta_raw) d(exp0(centroid), h_i) - offset)
        const long double beta = std::log1p(std::exp(static_cast<long double>(V("att.beta_raw")[0])));
        const long double offset = V("att.offset")[0];
        const LVec centroid = exp0(V("att.centroid"));
        std::vector<LVec> klein;
        std::vector<long double> alpha;
        for (const auto& st : states) {
            alpha.push_back(std::exp(-beta * distance(centroid, st) - offset));
            klein.push_back(poincare_to_klein(st));
        }
        return klein_to_poincare(einstein_midpoint(klein, alpha));
    }
};

struct Fixture {
    ParameterStore store;
    Hfan hfan;
    Fixture(const HfanConfig& cfg, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        hfan = Hfan(store, "hfan.", cfg, rng);
    }
};

}  // namespace

TEST(Hfan, SingleUtteranceReturnsItsGruStateForAnyBeta) {
    std::mt19937_64 rng(41);
    Fixture f({.input_dim = 4, .latent_dim = 3}, 1);
    const auto history = random_history(rng, 1, 4);
    for (double raw : {-5.0, 0.0, 3.0}) {
        f.hfan.beta_raw().value = {raw};
        Tape tape;
        const auto sp = hyp::Space::hyperbolic(tape);
        const auto states = f.hfan.encode(sp, history);
        const Tensor out = f.hfan.forward(sp, history);
        EXPECT_EQ(ad::to_vector(out), ad::to_vector(states.front()));
    }
}

TEST(Hfan, DuplicatedHistoryInvariantWhenGruBypassed) {
    std::mt19937_64 rng(42);
    Fixture f({.input_dim = 5, .latent_dim = 4, .use_dft = false, .bypass_gru = true}, 2);
    const auto history = random_history(rng, 4, 5);
    History doubled;
    for (const auto& h : history) {
        doubled.push_back(h);
        doubled.push_back(h);
    }
    Tape tape;
    const auto sp = hyp::Space::hyperbolic(tape);
    const Tensor a = f.hfan.forward(sp, history);
    const Tensor b = f.hfan.forward(sp, doubled);
    EXPECT_LT(max_diff(a.values(), b.values()), 1e-12);

    // at the attention stage duplication is invisible with the GRU too
    Fixture g({.input_dim = 5, .latent_dim = 4}, 3);
    const auto states = g.hfan.encode(sp, history);
    std::vector<Tensor> twice;
    for (const auto& s : states) {
        twice.push_back(s);
        twice.push_back(s);
    }
    EXPECT_LT(max_diff(g.hfan.attend(sp, states).values(), g.hfan.attend(sp, twice).values()), 1e-12);
}

TEST(Hfan, MatchesStraightLineReference) {
    for (std::uint64_t seed : {5u, 6u, 7u}) {
        std::mt19937_64 rng(seed);
        Fixture f({.input_dim = 6, .latent_dim = 4}, seed);
        // non-trivial attention parameters
        f.store.at("hfan.att.offset").value = {0.3};
        f.store.at("hfan.att.beta_raw").value = {0.7};
        for (const char* b : {"hfan.gru.bz", "hfan.gru.br", "hfan.gru.bh"})
            f.store.at(b).value = hypersyn::testing::random_vector(rng, 4, 0.2);
        const auto history = random_history(rng, 3, 6);
        const Reference ref{f.store, "hfan."};
        for (bool dft : {true, false}) {
            Fixture g({.input_dim = 6, .latent_dim = 4, .use_dft = dft}, seed);
            g.store.copy_values_from(f.store);
            Tape tape;
            const auto sp = hyp::Space::hyperbolic(tape);
            const Tensor out = g.hfan.forward(sp, history);
            EXPECT_LT(max_diff(out.values(), ref.forward(history, dft)), 1e-9) << "seed " << seed << " dft " << dft;
        }
    }
}

TEST(HfanGru, ZeroParametersLeaveHiddenStateUnchanged) {
    Fixture f({.input_dim = 3, .latent_dim = 3}, 8);
    for (auto& p : f.store) std::fill(p->value.begin(), p->value.end(), 0.0);
    Tape tape;
    const auto sp = hyp::Space::hyperbolic(tape);
    const Tensor h = tape.constant({0.3, -0.2, 0.4}, ad::Shape::vector(3));
    const Tensor x = tape.constant({-0.5, 0.1, 0.2}, ad::Shape::vector(3));
    EXPECT_LT(max_diff(f.hfan.gru_step(sp, h, x).values(), h.values()), 1e-15);
}

TEST(HfanGru, NearOriginMatchesEuclideanGru) {
    const double scale = 1e-4;
    for (std::uint64_t seed : {9u, 10u, 11u}) {
        std::mt19937_64 rng(seed);
        Fixture f({.input_dim = 4, .latent_dim = 4}, seed);
        for (const char* b : {"hfan.gru.bz", "hfan.gru.br", "hfan.gru.bh"})
            f.store.at(b).value = hypersyn::testing::random_vector(rng, 4, scale);
        auto to_eigen = [](const Matrix& m) {
            Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
            for (std::size_t i = 0; i < m.size(); ++i)
                for (std::size_t j = 0; j < m[0].size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
            return out;
        };
        auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())).eval(); };
        const auto& s = f.store;
        const oracle::EuclideanGru euc{to_eigen(as_matrix(s.at("hfan.gru.Wz"))), to_eigen(as_matrix(s.at("hfan.gru.Uz"))),
                                       to_eigen(as_matrix(s.at("hfan.gru.Wr"))), to_eigen(as_matrix(s.at("hfan.gru.Ur"))),
                                       to_eigen(as_matrix(s.at("hfan.gru.Wh"))), to_eigen(as_matrix(s.at("hfan.gru.Uh"))),
                                       vec(s.at("hfan.gru.bz").value),           vec(s.at("hfan.gru.br").value),
                                       vec(s.at("hfan.gru.bh").value)};
        const auto h = hypersyn::testing::random_vector(rng, 4, scale);
        const auto x = hypersyn::testing::random_vector(rng, 4, scale);
        Tape tape;
        const auto sp = hyp::Space::hyperbolic(tape);
        const Tensor got = f.hfan.gru_step(sp, tape.constant(h, ad::Shape::vector(4)), tape.constant(x, ad::Shape::vector(4)));
        const Eigen::VectorXd want = euc.step(vec(h), vec(x));
        Eigen::VectorXd g(4);
        for (int i = 0; i < 4; ++i) g(i) = got[static_cast<std::size_t>(i)];
        EXPECT_LT((g - want).norm() / want.norm(), 1e-3) << "seed " << seed;

        // and the Euclidean mode of the same layer is exactly that recurrence
        const auto flat = hyp::Space::flat(tape);
        const Tensor e = f.hfan.gru_step(flat, tape.constant(h, ad::Shape::vector(4)), tape.constant(x, ad::Shape::vector(4)));
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(e[static_cast<std::size_t>(i)], want(i), 1e-15);
    }
}

TEST(HfanGru, GradcheckOnGateParameters) {
    std::mt19937_64 rng(12);
    Fixture f({.input_dim = 3, .latent_dim = 4}, 12);
    for (const char* b : {"hfan.gru.bz", "hfan.gru.br", "hfan.gru.bh"})
        f.store.at(b).value = hypersyn::testing::random_vector(rng, 4, 0.3);
    const auto h = hypersyn::testing::random_vector(rng, 4, 0.3);
    const auto x = hypersyn::testing::random_vector(rng, 4, 0.3);
    std::vector<ad::Parameter*> params;
    for (const char* g : {"z", "r", "h"})
        for (const char* k : {"W", "U", "b"}) params.push_back(&f.store.at(std::string("hfan.gru.") + k + g));
    const auto r = hypersyn::testing::check_params(
        [&](Tape& tape) {
            const auto sp = hyp::Space::hyperbolic(tape, 1.3);
            return hypersyn::testing::probe_loss(
                tape, f.hfan.gru_step(sp, tape.constant(h, ad::Shape::vector(4)), tape.constant(x, ad::Shape::vector(4))));
        },
        f.store, params);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Hfan, GradcheckWholeEncoder) {
    std::mt19937_64 rng(13);
    Fixture f({.input_dim = 4, .latent_dim = 3}, 13);
    f.store.at("hfan.att.offset").value = {0.2};
    const auto history = random_history(rng, 4, 4);
    std::vector<ad::Parameter*> params;
    for (auto& p : f.store) params.push_back(p.get());
    const auto r = hypersyn::testing::check_params(
        [&](Tape& tape) {
            const auto sp = hyp::Space::hyperbolic(tape);
            return hypersyn::testing::probe_loss(tape, f.hfan.forward(sp, history));
        },
        f.store, params);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(HfanAttention, WeightsPositiveAndZeroBetaGivesLorentzFactorWeighting) {
    std::mt19937_64 rng(14);
    Fixture f({.input_dim = 5, .latent_dim = 3}, 14);
    f.store.at("hfan.att.offset").value = {-0.4};
    const auto history = random_history(rng, 5, 5, 1.5);
    Tape tape;
    const auto sp = hyp::Space::hyperbolic(tape);
    const auto states = f.hfan.encode(sp, history);
    for (const auto& a : f.hfan.attention_weights(sp, states)) {
        EXPECT_GT(a.item(), 0.0);
        EXPECT_TRUE(std::isfinite(a.item()));
    }
    const auto zero = f.hfan.attention_weights(sp, states, 0.0);
    for (const auto& a : zero) EXPECT_DOUBLE_EQ(a.item(), std::exp(0.4));

    std::vector<LVec> klein;
    for (const auto& s : states) klein.push_back(oracle::poincare_to_klein(LVec(s.values().begin(), s.values().end())));
    const LVec want = oracle::klein_to_poincare(oracle::einstein_midpoint(klein, std::vector<long double>(klein.size(), 1)));
    EXPECT_LT(max_diff(f.hfan.attend(sp, states, 0.0).values(), want), 1e-12);
}

TEST(HfanAttention, PermutationAfterGruIsInvisibleBeforeGruIsNot) {
    std::mt19937_64 rng(15);
    Fixture f({.input_dim = 4, .latent_dim = 4}, 15);
    auto history = random_history(rng, 5, 4);
    Tape tape;
    const auto sp = hyp::Space::hyperbolic(tape);
    auto states = f.hfan.encode(sp, history);
    const Tensor base = f.hfan.attend(sp, states);
    std::vector<Tensor> shuffled(states.rbegin(), states.rend());
    std::swap(shuffled[0], shuffled[2]);
    EXPECT_LT(max_diff(f.hfan.attend(sp, shuffled).values(), base.values()), 1e-12);

    std::reverse(history.begin(), history.end());
    EXPECT_GT(max_diff(f.hfan.forward(sp, history).values(), base.values()), 1e-6);
}

TEST(Hfan, MixWithoutDftOnlyLiftsRows) {
    std::mt19937_64 rng(16);
    const auto history = random_history(rng, 3, 4);
    const auto rows = Hfan::mix(history, false, false);
    for (std::size_t s = 0; s < 3; ++s) {
        const LVec want = oracle::exp0(oracle::to_l(history[s]));
        EXPECT_LT(max_diff(std::span<const double>(rows[s].data(), 4), want), 1e-15);
    }
    const auto flat = Hfan::mix(history, true, true);
    Eigen::MatrixXd x(3, 4);
    for (int s = 0; s < 3; ++s)
        for (int j = 0; j < 4; ++j) x(s, j) = history[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
    const Eigen::MatrixXd want = oracle::naive_dft2_real(x) / std::sqrt(12.0);
    for (int s = 0; s < 3; ++s) EXPECT_LT((flat[static_cast<std::size_t>(s)] - want.row(s).transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(Hfan::mix({}, true, false), hypersyn::ContractViolation);
    EXPECT_THROW(Hfan::mix({{1.0, 2.0}, {1.0}}, true, false), hypersyn::ShapeError);
}

TEST(Hfan, OutputStrictlyInsideBallOnSyntheticCorpora) {
    for (double cs : {0.0, 0.9}) {
        hypersyn::synthetic::SyntheticConfig cfg;
        cfg.context_sensitivity = cs;
        cfg.n_trees = 50;
        const auto sc = hypersyn::synthetic::generate_synthetic(cfg);
        Fixture f({.input_dim = 16, .latent_dim = 16}, 17);
        for (const auto& u : sc.corpus.users) {
            Tape tape;
            const auto sp = hyp::Space::hyperbolic(tape);
            const double n = ad::norm(f.hfan.forward(sp, u.history)).item();
            ASSERT_LT(n, 1.0 - hypersyn::geo::kBallEps + 1e-15) << u.id;
        }
    }
}
