#pragma once

// Context-synergized hyperbolic Tree-LSTM. A cell reads the utterance point x,
// the author's context point u, and the states of its predecessors (children
// on the upward pass, the parent on the downward pass). Utterance and user
// context enter through separate input/memory gate pairs.

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/data.hpp"
#include "hypersyn/hfan.hpp"
#include "hypersyn/hyperbolic.hpp"
#include "hypersyn/optim.hpp"

namespace hypersyn::model {

struct CshtConfig {
    std::size_t utter_dim = 16;
    std::size_t user_dim = 16;
    std::size_t hidden = 32;
    bool use_user = true;       // false: vanilla hyperbolic Tree-LSTM over utterances only
    bool bidirectional = true;  // false: downward slot is the origin
};

struct CellState {
    Tensor c;
    Tensor h;
};

/// Per-node outputs of both passes, indexed like ConversationTree::nodes.
struct TreeStates {
    std::vector<CellState> up;
    std::vector<CellState> down;
};

class CshtDirection {
public:
    CshtDirection() = default;

    CshtDirection(ParameterStore& store, const std::string& prefix, const CshtConfig& cfg, std::mt19937_64& rng)
        : cfg_(cfg) {
        const std::size_t d = cfg.utter_dim, g = cfg.user_dim, h = cfg.hidden;
        auto gate = [&](const std::string& name, std::size_t in) {
            Gate out;
            out.W = &store.add_glorot(prefix + "W" + name, h, in, rng);
            out.U = &store.add_glorot(prefix + "U" + name, h, h, rng);
            out.b = &store.add_zeros(prefix + "b" + name, ad::Shape::vector(h));
            return out;
        };
        W_fx_ = &store.add_glorot(prefix + "Wfx", h, d, rng);
        if (cfg.use_user) W_fg_ = &store.add_glorot(prefix + "Wfg", h, g, rng);
        U_f_ = &store.add_glorot(prefix + "Uf", h, h, rng);
        b_f_ = &store.add_zeros(prefix + "bf", ad::Shape::vector(h));
        i_ = gate("i", d);
        u_ = gate("u", d);
        if (cfg.use_user) {
            m_ = gate("m", g);
            s_ = gate("s", g);
        }
        o_ = gate("o", cfg.use_user ? g : d);
    }

    const CshtConfig& config() const noexcept { return cfg_; }

    /// One cell. `x_log` and `u_log` are log0 of the utterance and user
    /// points; `u_log` is ignored in vanilla mode. Predecessors are combined
    /// in the given order.
    CellState cell(const Space& sp, const Tensor& x_log, const Tensor& u_log, std::span<const CellState> preds) const {
        Tape& tape = sp.c.tape();
        if (x_log.size() != cfg_.utter_dim) throw ShapeError("csht: utterance dimension mismatch");
        if (cfg_.use_user && u_log.size() != cfg_.user_dim) throw ShapeError("csht: user dimension mismatch");
        const std::size_t h = cfg_.hidden;

        Tensor h_tilde;
        if (preds.empty()) {
            h_tilde = sp.origin(h);
        } else if (preds.size() == 1) {
            h_tilde = preds.front().h;
        } else {
            std::vector<Tensor> hs;
            hs.reserve(preds.size());
            for (const auto& p : preds) hs.push_back(p.h);
            h_tilde = sp.midpoint(hs);
        }
        const Tensor ht_log = sp.log0(h_tilde);

        auto pre = [&](const Gate& g, const Tensor& in_log) {
            return sp.add(sp.add(sp.lin(tape.param(*g.W), in_log), sp.lin(tape.param(*g.U), ht_log)),
                          sp.exp0(tape.param(*g.b)));
        };
        auto sig = [&](const Tensor& p) { return sp.exp0(ad::sigmoid(sp.log0(p))); };
        auto tnh = [&](const Tensor& p) { return sp.exp0(ad::tanh(sp.log0(p))); };

        const Tensor i = sig(pre(i_, x_log));
        const Tensor u = tnh(pre(u_, x_log));
        Tensor c = sp.pointwise(i, u);
        if (cfg_.use_user) {
            const Tensor m = sig(pre(m_, u_log));
            const Tensor s = tnh(pre(s_, u_log));
            c = sp.add(c, sp.pointwise(m, s));
        }
        const Tensor o = sig(pre(o_, cfg_.use_user ? u_log : x_log));

        if (!preds.empty()) {
            Tensor r = sp.lin(tape.param(*W_fx_), x_log);
            if (cfg_.use_user) r = sp.add(r, sp.lin(tape.param(*W_fg_), u_log));
            const Tensor Uf = tape.param(*U_f_);
            const Tensor bf = sp.exp0(tape.param(*b_f_));
            for (const auto& p : preds) {
                const Tensor f = sig(sp.add(sp.add(r, sp.lin(Uf, sp.log0(p.h))), bf));
                c = sp.add(c, sp.pointwise(f, p.c));
            }
        }
        const Tensor hout = sp.pointwise(o, sp.exp0(ad::tanh(sp.log0(c))));
        return {c, hout};
    }

private:
    struct Gate {
        ad::Parameter* W = nullptr;
        ad::Parameter* U = nullptr;
        ad::Parameter* b = nullptr;
    };

    CshtConfig cfg_;
    ad::Parameter* W_fx_ = nullptr;
    ad::Parameter* W_fg_ = nullptr;
    ad::Parameter* U_f_ = nullptr;
    ad::Parameter* b_f_ = nullptr;
    Gate i_, u_, m_, s_, o_;
};

class Csht {
public:
    Csht() = default;

    Csht(ParameterStore& store, const std::string& prefix, const CshtConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
        up_ = CshtDirection(store, prefix + "up.", cfg, rng);
        if (cfg.bidirectional) down_ = CshtDirection(store, prefix + "down.", cfg, rng);
    }

    const CshtConfig& config() const noexcept { return cfg_; }
    const CshtDirection& up() const noexcept { return up_; }
    const CshtDirection& down() const noexcept { return down_; }

    /// Both passes over a tree. `x_log[j]` and `u_log[j]` belong to node j
    /// (u_log may be empty in vanilla mode).
    TreeStates forward(const Space& sp, const data::ConversationTree& tree, std::span<const Tensor> x_log,
                       std::span<const Tensor> u_log) const {
        const std::size_t n = tree.nodes.size();
        if (x_log.size() != n) throw ContractViolation("csht: utterance vector count does not match tree size");
        if (cfg_.use_user && u_log.size() != n) throw ContractViolation("csht: user vector count does not match tree size");
        auto user = [&](std::size_t j) { return cfg_.use_user ? u_log[j] : Tensor{}; };

        TreeStates out;
        out.up.resize(n);
        std::vector<CellState> preds;
        for (std::size_t lvl = tree.levels.size(); lvl-- > 0;) {
            for (std::size_t j : tree.levels[lvl]) {
                preds.clear();
                for (std::size_t k : tree.children[j]) preds.push_back(out.up[k]);
                out.up[j] = up_.cell(sp, x_log[j], user(j), preds);
            }
        }

        out.down.resize(n);
        if (!cfg_.bidirectional) {
            const Tensor origin = sp.origin(cfg_.hidden);
            for (auto& s : out.down) s = {origin, origin};
            return out;
        }
        for (const auto& level : tree.levels) {
            for (std::size_t j : level) {
                preds.clear();
                if (tree.parent[j]) preds.push_back(out.down[*tree.parent[j]]);
                out.down[j] = down_.cell(sp, x_log[j], user(j), preds);
            }
        }
        return out;
    }

private:
    CshtConfig cfg_;
    CshtDirection up_;
    CshtDirection down_;
};

}  // namespace hypersyn::model
