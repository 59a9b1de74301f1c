#pragma once

// Hyperbolic Fourier Attention Network: a user's time-ordered history is
// Fourier-mixed in the tangent space at the origin, lifted to the ball,
// projected to the latent dimension, run through a hyperbolic GRU, and pooled
// by distance-based attention with an Einstein midpoint.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/geometry.hpp"
#include "hypersyn/hyperbolic.hpp"
#include "hypersyn/optim.hpp"
#include "hypersyn/spectral.hpp"

namespace hypersyn::model {

using ad::Tape;
using ad::Tensor;
using hyp::Space;

/// softplus^-1(1): raw value of a softplus-parameterized scalar equal to one.
inline const double kSoftplusOne = std::log(std::expm1(1.0));

struct HfanConfig {
    std::size_t input_dim = 16;
    std::size_t latent_dim = 16;
    bool use_dft = true;
    bool bypass_gru = false;
};

class Hfan {
public:
    Hfan() = default;

    Hfan(ParameterStore& store, const std::string& prefix, const HfanConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        const std::size_t d = cfg.input_dim, l = cfg.latent_dim;
        proj_ = &store.add_glorot(prefix + "proj", l, d, rng);
        for (auto* g : {&z_, &r_, &h_}) {
            const std::string name = g == &z_ ? "z" : g == &r_ ? "r" : "h";
            g->W = &store.add_glorot(prefix + "gru.W" + name, l, l, rng);
            g->U = &store.add_glorot(prefix + "gru.U" + name, l, l, rng);
            g->b = &store.add_zeros(prefix + "gru.b" + name, ad::Shape::vector(l));
        }
        std::normal_distribution<double> init(0.0, 0.1);
        std::vector<double> centroid(l);
        for (double& x : centroid) x = init(rng);
        centroid_ = &store.add(prefix + "att.centroid", ad::Shape::vector(l), std::move(centroid));
        beta_raw_ = &store.add(prefix + "att.beta_raw", ad::Shape::scalar(), {kSoftplusOne});
        offset_ = &store.add(prefix + "att.offset", ad::Shape::scalar(), {0.0});
    }

    const HfanConfig& config() const noexcept { return cfg_; }

    /// Fourier mixing of the raw history: rows are lifted to the ball and
    /// back (log0 exp0), mixed by the real 2D DFT scaled by 1/sqrt(S d), and
    /// mapped onto the ball. Purely a function of the data, so it is
    /// evaluated in plain doubles. Euclidean mode skips the maps.
    static std::vector<geo::Vec> mix(const std::vector<std::vector<double>>& history, bool use_dft, bool euclidean) {
        if (history.empty()) throw ContractViolation("hfan: empty history");
        const auto S = static_cast<Eigen::Index>(history.size());
        const auto d = static_cast<Eigen::Index>(history.front().size());
        spectral::Matrix x(S, d);
        for (Eigen::Index s = 0; s < S; ++s) {
            if (static_cast<Eigen::Index>(history[static_cast<std::size_t>(s)].size()) != d)
                throw ShapeError("hfan: ragged history");
            const geo::Vec row = Eigen::Map<const geo::Vec>(history[static_cast<std::size_t>(s)].data(), d);
            x.row(s) = euclidean ? row : geo::log_map0(geo::exp_map0(row));
        }
        if (use_dft) x = spectral::dft2_real(x) / std::sqrt(static_cast<double>(S * d));
        std::vector<geo::Vec> out;
        out.reserve(history.size());
        for (Eigen::Index s = 0; s < S; ++s) {
            const geo::Vec row = x.row(s).transpose();
            out.push_back(euclidean ? row : geo::exp_map0(row).coords());
        }
        return out;
    }

    /// One hyperbolic GRU step:
    ///   z = sigma(log0(Wz(x)x + Uz(x)h + bz)), r likewise,
    ///   cand = h + (Wh(x)x + Uh(x)(r(x)h) + bh),
    ///   h' = h + diag(z)(x)(-h + cand),
    /// with every + a Mobius addition and biases mapped from the tangent space.
    Tensor gru_step(const Space& sp, const Tensor& h, const Tensor& x) const {
        Tape& tape = sp.c.tape();
        const Tensor lx = sp.log0(x);
        const Tensor lh = sp.log0(h);
        auto pre = [&](const Gate& g, const Tensor& hidden_log) {
            return sp.add(sp.add(sp.lin(tape.param(*g.W), lx), sp.lin(tape.param(*g.U), hidden_log)),
                          sp.exp0(tape.param(*g.b)));
        };
        const Tensor z = ad::sigmoid(sp.log0(pre(z_, lh)));
        const Tensor r = ad::sigmoid(sp.log0(pre(r_, lh)));
        const Tensor cand = sp.add(h, pre(h_, r * lh));
        return sp.add(h, sp.exp0(z * sp.log0(sp.add(-h, cand))));
    }

    /// Ball points fed to attention: projected inputs run through the GRU
    /// from the origin (oldest first), or the projected inputs themselves
    /// when the GRU is bypassed.
    std::vector<Tensor> encode(const Space& sp, const std::vector<std::vector<double>>& history) const {
        return encode_mixed(sp, mix(history, cfg_.use_dft, sp.euclidean));
    }

    /// As encode, starting from rows already passed through mix().
    std::vector<Tensor> encode_mixed(const Space& sp, const std::vector<geo::Vec>& rows) const {
        Tape& tape = sp.c.tape();
        const Tensor proj = tape.param(*proj_);
        std::vector<Tensor> states;
        states.reserve(rows.size());
        Tensor h = sp.origin(cfg_.latent_dim);
        for (const auto& row : rows) {
            const Tensor x = sp.matvec(proj, tape.constant(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
            if (cfg_.bypass_gru) {
                states.push_back(x);
            } else {
                h = gru_step(sp, h, x);
                states.push_back(h);
            }
        }
        return states;
    }

    /// alpha_i = exp(-beta d(centroid, state_i) - offset) with beta =
    /// softplus(beta_raw) unless overridden. Distances are Lorentz-model
    /// distances in hyperbolic mode.
    std::vector<Tensor> attention_weights(const Space& sp, std::span<const Tensor> states,
                                          std::optional<double> beta_override = std::nullopt) const {
        Tape& tape = sp.c.tape();
        const Tensor beta = beta_override ? tape.scalar(*beta_override) : ad::softplus(tape.param(*beta_raw_));
        const Tensor offset = tape.param(*offset_);
        const Tensor theta = tape.param(*centroid_);
        std::vector<Tensor> alpha;
        alpha.reserve(states.size());
        if (sp.euclidean) {
            for (const Tensor& s : states) alpha.push_back(ad::exp(-(beta * sp.dist(theta, s)) - offset));
            return alpha;
        }
        const Tensor centroid = hyp::to_lorentz(sp.exp0(theta), sp.c);
        for (const Tensor& s : states)
            alpha.push_back(ad::exp(-(beta * hyp::lorentz_distance(centroid, hyp::to_lorentz(s, sp.c), sp.c)) - offset));
        return alpha;
    }

    Tensor attend(const Space& sp, std::span<const Tensor> states, std::optional<double> beta_override = std::nullopt) const {
        if (states.empty()) throw ContractViolation("hfan: empty history");
        if (states.size() == 1) return states.front();
        const auto alpha = attention_weights(sp, states, beta_override);
        return sp.midpoint(states, alpha);
    }

    /// User vector U^hist (dimension latent_dim).
    Tensor forward(const Space& sp, const std::vector<std::vector<double>>& history) const {
        const auto states = encode(sp, history);
        return attend(sp, states);
    }

    Tensor forward_mixed(const Space& sp, const std::vector<geo::Vec>& rows) const {
        const auto states = encode_mixed(sp, rows);
        return attend(sp, states);
    }

    ad::Parameter& projection() const { return *proj_; }
    ad::Parameter& beta_raw() const { return *beta_raw_; }

private:
    struct Gate {
        ad::Parameter* W = nullptr;
        ad::Parameter* U = nullptr;
        ad::Parameter* b = nullptr;
    };

    HfanConfig cfg_;
    ad::Parameter* proj_ = nullptr;
    Gate z_, r_, h_;
    ad::Parameter* centroid_ = nullptr;
    ad::Parameter* beta_raw_ = nullptr;
    ad::Parameter* offset_ = nullptr;
};

}  // namespace hypersyn::model
