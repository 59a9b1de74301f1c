#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/errors.hpp"

namespace hypersyn {

/// Owns every learnable array of a model, addressable by name. Parameter
/// addresses are stable for the lifetime of the store.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore& other) { *this = other; }
    ParameterStore& operator=(const ParameterStore& other) {
        if (this == &other) return *this;
        params_.clear();
        index_.clear();
        for (const auto& p : other.params_) insert(std::make_unique<ad::Parameter>(*p));
        return *this;
    }
    ParameterStore(ParameterStore&&) noexcept = default;
    ParameterStore& operator=(ParameterStore&&) noexcept = default;

    ad::Parameter& add(const std::string& name, ad::Shape shape, std::vector<double> values) {
        if (index_.count(name)) throw ContractViolation("duplicate parameter name: " + name);
        if (values.size() != shape.numel()) throw ShapeError("parameter " + name + ": value count mismatch");
        auto p = std::make_unique<ad::Parameter>();
        p->name = name;
        p->shape = shape;
        p->value = std::move(values);
        return insert(std::move(p));
    }

    ad::Parameter& add_zeros(const std::string& name, ad::Shape shape) {
        return add(name, shape, std::vector<double>(shape.numel(), 0.0));
    }

    /// Glorot-uniform initialisation scaled by `gain`.
    ad::Parameter& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                              double gain = 1.0) {
        const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
        std::uniform_real_distribution<double> dist(-limit, limit);
        std::vector<double> v(rows * cols);
        for (double& x : v) x = dist(rng);
        return add(name, ad::Shape::matrix(rows, cols), std::move(v));
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }
    ad::Parameter& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractViolation("unknown parameter: " + name);
        return *params_[it->second];
    }
    const ad::Parameter& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractViolation("unknown parameter: " + name);
        return *params_[it->second];
    }

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->size();
        return n;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    /// Overwrite values (and optimizer moments) from a store with the same
    /// parameter names and shapes, keeping parameter addresses stable.
    void copy_values_from(const ParameterStore& other) {
        for (auto& p : params_) {
            const auto& q = other.at(p->name);
            if (!(q.shape == p->shape)) throw ShapeError("copy_values_from: shape mismatch for " + p->name);
            p->value = q.value;
            p->m = q.m;
            p->v = q.v;
        }
    }

    /// Value-only equality (moments and gradients ignored).
    bool same_values(const ParameterStore& other) const {
        if (size() != other.size()) return false;
        for (const auto& p : params_) {
            if (!other.contains(p->name)) return false;
            const auto& q = other.at(p->name);
            if (!(q.shape == p->shape) || q.value != p->value) return false;
        }
        return true;
    }

private:
    ad::Parameter& insert(std::unique_ptr<ad::Parameter> p) {
        index_.emplace(p->name, params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    std::vector<std::unique_ptr<ad::Parameter>> params_;
    std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double lr = 1.3e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 3.2e-4;  // decoupled
};

/// Adam with decoupled weight decay. Moments live on the parameters so a
/// store copy snapshots optimizer state too.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const noexcept { return cfg_; }
    long steps() const noexcept { return t_; }

    void step(ParameterStore& store) {
        for (const auto& p : store) {
            if (!p->trainable || p->grad.empty()) continue;
            for (double g : p->grad)
                if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter " + p->name);
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& p : store) {
            if (!p->trainable) continue;
            if (p->grad.size() != p->value.size()) p->zero_grad();
            if (p->m.size() != p->value.size()) p->m.assign(p->value.size(), 0.0);
            if (p->v.size() != p->value.size()) p->v.assign(p->value.size(), 0.0);
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                const double g = p->grad[i];
                p->m[i] = cfg_.beta1 * p->m[i] + (1.0 - cfg_.beta1) * g;
                p->v[i] = cfg_.beta2 * p->v[i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = p->m[i] / bc1;
                const double vhat = p->v[i] / bc2;
                p->value[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * p->value[i]);
            }
        }
    }

private:
    AdamConfig cfg_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: {"format", "version", "meta", "params": {name: {shape, values}}}

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "hypersyn-checkpoint";

inline nlohmann::json checkpoint_to_json(const ParameterStore& store, const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : store) params[p->name] = {{"shape", p->shape.dims()}, {"values", p->value}};
    return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"meta", meta}, {"params", params}};
}

inline ParameterStore checkpoint_from_json(const nlohmann::json& j, const std::string& source = "checkpoint") {
    if (!j.is_object() || !j.contains("version")) throw DataError(source, 0, "version", "missing checkpoint version");
    if (j.at("version") != kCheckpointVersion)
        throw DataError(source, 0, "version", "unsupported checkpoint version " + j.at("version").dump());
    if (!j.contains("params") || !j.at("params").is_object()) throw DataError(source, 0, "params", "missing params");
    ParameterStore store;
    for (const auto& [name, entry] : j.at("params").items()) {
        try {
            const auto dims = entry.at("shape").get<std::vector<std::size_t>>();
            ad::Shape shape;
            if (dims.size() == 1) shape = ad::Shape::vector(dims[0]);
            else if (dims.size() == 2) shape = ad::Shape::matrix(dims[0], dims[1]);
            else if (!dims.empty()) throw DataError(source, 0, name, "rank > 2");
            store.add(name, shape, entry.at("values").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(source, 0, name, e.what());
        } catch (const ShapeError& e) {
            throw DataError(source, 0, name, e.what());
        }
    }
    return store;
}

inline void save_checkpoint(const std::string& path, const ParameterStore& store,
                            const nlohmann::json& meta = nlohmann::json::object()) {
    std::ofstream out(path);
    if (!out) throw DataError(path, 0, "", "cannot open for writing");
    out << checkpoint_to_json(store, meta).dump() << '\n';
}

struct LoadedCheckpoint {
    ParameterStore params;
    nlohmann::json meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path, 0, "", "cannot open checkpoint");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path, 0, "", std::string("malformed JSON: ") + e.what());
    }
    return {checkpoint_from_json(j, path), j.value("meta", nlohmann::json::object())};
}

}  // namespace hypersyn
