#pragma once

// Minimal reverse-mode automatic differentiation over dense rank-0/1/2
// tensors. A Tape records every operation eagerly (values are computed on
// construction); backward() walks the records in reverse creation order,
// which is a reverse topological order of the expression graph.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hypersyn/errors.hpp"

namespace hypersyn::ad {

class Shape {
public:
    Shape() = default;  // scalar
    Shape(std::initializer_list<std::size_t> dims) {
        if (dims.size() > 2) throw ShapeError("only rank <= 2 tensors are supported");
        for (std::size_t d : dims) dims_[rank_++] = d;
    }
    static Shape scalar() { return {}; }
    static Shape vector(std::size_t n) { return {n}; }
    static Shape matrix(std::size_t r, std::size_t c) { return {r, c}; }

    std::size_t rank() const noexcept { return rank_; }
    std::size_t operator[](std::size_t i) const noexcept { return dims_[i]; }
    std::size_t numel() const noexcept {
        std::size_t n = 1;
        for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
        return n;
    }
    std::vector<std::size_t> dims() const { return {dims_.begin(), dims_.begin() + rank_}; }
    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < rank_; ++i) s += (i ? "," : "") + std::to_string(dims_[i]);
        return s + "]";
    }

    friend bool operator==(const Shape& a, const Shape& b) {
        if (a.rank_ != b.rank_) return false;
        for (std::size_t i = 0; i < a.rank_; ++i)
            if (a.dims_[i] != b.dims_[i]) return false;
        return true;
    }

private:
    std::array<std::size_t, 2> dims_{};
    std::size_t rank_ = 0;
};

/// A named learnable array that outlives individual tapes. Gradients from
/// every tape that references it accumulate into `grad`.
struct Parameter {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    // Adam moments
    std::vector<double> m;
    std::vector<double> v;
    bool trainable = true;

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { grad.assign(value.size(), 0.0); }
};

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    Scale,
    MatMul,
    Concat,
    Stack,
    Row,
    Slice,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Atanh,
    Asinh,
    Sqrt,
    Relu,
    Softplus,
    Clamp,
    Norm,
    Dot,
    Sum,
    Mean,
    Softmax,
    LogSoftmax,
    Custom,
};

inline constexpr double kNormFloor = 1e-15;

/// An operation with a hand-written derivative, recorded as a single node.
struct CustomFunction {
    virtual ~CustomFunction() = default;
    virtual std::vector<double> forward(std::span<const std::span<const double>> inputs) const = 0;
    /// Add the vector-Jacobian product of `grad_out` into `grads[k]` for every
    /// input whose span is nonempty.
    virtual void backward(std::span<const std::span<const double>> inputs, std::span<const double> output,
                          std::span<const double> grad_out, std::span<const std::span<double>> grads) const = 0;
};

struct Node {
    Op op = Op::Leaf;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::uint32_t parent_begin = 0;
    std::uint32_t parent_count = 0;
    double a = 0.0;  // op constants (scale, clamp bounds, ...)
    double b = 0.0;
    std::size_t index = 0;  // row / slice offset
    Parameter* param = nullptr;
    std::shared_ptr<const CustomFunction> custom;
    bool requires_grad = false;
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

    bool valid() const noexcept { return tape_ != nullptr; }
    Tape& tape() const { return *tape_; }
    std::uint32_t id() const noexcept { return id_; }

    const Shape& shape() const;
    std::size_t size() const { return shape().numel(); }
    std::span<const double> values() const;
    double item() const;
    double operator[](std::size_t i) const { return values()[i]; }
    std::span<const double> grad() const;
    bool requires_grad() const;

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor constant(std::vector<double> values, Shape shape) { return leaf(std::move(values), shape, false); }
    Tensor constant(std::span<const double> values) {
        return leaf({values.begin(), values.end()}, Shape::vector(values.size()), false);
    }
    Tensor scalar(double v) { return leaf({v}, Shape::scalar(), false); }
    Tensor zeros(std::size_t n) { return leaf(std::vector<double>(n, 0.0), Shape::vector(n), false); }
    /// Leaf that receives a gradient but is not tied to a Parameter.
    Tensor variable(std::vector<double> values, Shape shape) { return leaf(std::move(values), shape, true); }

    /// Leaf bound to a parameter; repeated calls return the same node.
    Tensor param(Parameter& p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
        Tensor t = leaf(p.value, p.shape, p.trainable);
        nodes_[t.id()].param = &p;
        param_nodes_.emplace(&p, t.id());
        return t;
    }

    /// Record an operation and evaluate it immediately.
    Tensor record(Op op, Shape shape, std::initializer_list<Tensor> parents, double a = 0.0, double b = 0.0,
                  std::size_t index = 0) {
        return record(op, shape, std::span<const Tensor>(parents.begin(), parents.size()), a, b, index);
    }

    Tensor record(Op op, Shape shape, std::span<const Tensor> parents, double a = 0.0, double b = 0.0,
                  std::size_t index = 0) {
        Node n;
        n.op = op;
        n.shape = shape;
        n.a = a;
        n.b = b;
        n.index = index;
        n.parent_begin = static_cast<std::uint32_t>(parent_ids_.size());
        n.parent_count = static_cast<std::uint32_t>(parents.size());
        for (const Tensor& p : parents) {
            if (&p.tape() != this) throw ContractViolation("tensor belongs to a different tape");
            parent_ids_.push_back(p.id());
            n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
        }
        n.value = evaluate(n);
        nodes_.push_back(std::move(n));
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    /// Record a custom operation; its value comes from fn->forward unless
    /// supplied by the caller.
    Tensor record_custom(std::shared_ptr<const CustomFunction> fn, Shape shape, std::span<const Tensor> parents,
                         std::vector<double> value = {}) {
        Node n;
        n.op = Op::Custom;
        n.shape = shape;
        n.custom = std::move(fn);
        n.parent_begin = static_cast<std::uint32_t>(parent_ids_.size());
        n.parent_count = static_cast<std::uint32_t>(parents.size());
        for (const Tensor& p : parents) {
            if (&p.tape() != this) throw ContractViolation("tensor belongs to a different tape");
            parent_ids_.push_back(p.id());
            n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
        }
        n.value = value.empty() ? evaluate(n) : std::move(value);
        if (n.value.size() != shape.numel()) throw ShapeError("custom op returned the wrong number of values");
        nodes_.push_back(std::move(n));
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    const Node& node(std::uint32_t id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Populate gradients of every node reachable from `loss` and accumulate
    /// into bound parameters.
    void backward(Tensor loss) {
        if (loss.size() != 1) throw ContractViolation("backward: loss must be a scalar, got shape " + loss.shape().str());
        for (Node& n : nodes_) n.grad.clear();
        Node& root = nodes_[loss.id()];
        if (!root.requires_grad) return;
        root.grad.assign(1, 1.0);
        for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (!n.requires_grad || n.grad.empty()) continue;
            if (n.op == Op::Leaf) {
                if (n.param) {
                    if (n.param->grad.size() != n.param->value.size()) n.param->zero_grad();
                    for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
                }
                continue;
            }
            propagate(n);
        }
    }

    /// Re-evaluate every recorded operation from the leaves and report whether
    /// all values reproduce bit-for-bit.
    bool replay_matches() const {
        for (const Node& n : nodes_) {
            if (n.op == Op::Leaf) continue;
            if (evaluate(n) != n.value) return false;
        }
        return true;
    }

private:
    Tensor leaf(std::vector<double> values, Shape shape, bool requires_grad) {
        if (values.size() != shape.numel())
            throw ShapeError("leaf: " + std::to_string(values.size()) + " values for shape " + shape.str());
        Node n;
        n.shape = shape;
        n.value = std::move(values);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    const Node& parent(const Node& n, std::size_t k) const { return nodes_[parent_ids_[n.parent_begin + k]]; }

    std::vector<double>& grad_of_parent(const Node& n, std::size_t k) {
        Node& p = nodes_[parent_ids_[n.parent_begin + k]];
        if (p.grad.empty()) p.grad.assign(p.value.size(), 0.0);
        return p.grad;
    }

    bool parent_needs_grad(const Node& n, std::size_t k) const { return parent(n, k).requires_grad; }

    static double sigmoid(double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }
    static double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

    std::vector<double> evaluate(const Node& n) const {
        std::vector<double> out(n.shape.numel());
        auto unary = [&](auto f) {
            const auto& x = parent(n, 0).value;
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
        };
        auto binary = [&](auto f) {
            const auto& x = parent(n, 0).value;
            const auto& y = parent(n, 1).value;
            const bool xs = x.size() == 1, ys = y.size() == 1;
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[xs ? 0 : i], y[ys ? 0 : i]);
        };
        switch (n.op) {
            case Op::Leaf: return n.value;
            case Op::Custom: {
                std::vector<std::span<const double>> in;
                for (std::size_t k = 0; k < n.parent_count; ++k) in.emplace_back(parent(n, k).value);
                return n.custom->forward(in);
            }
            case Op::Add: binary([](double x, double y) { return x + y; }); break;
            case Op::Sub: binary([](double x, double y) { return x - y; }); break;
            case Op::Mul: binary([](double x, double y) { return x * y; }); break;
            case Op::Div: binary([](double x, double y) { return x / y; }); break;
            case Op::Neg: unary([](double x) { return -x; }); break;
            case Op::AddConst: unary([&](double x) { return x + n.a; }); break;
            case Op::Scale: unary([&](double x) { return x * n.a; }); break;
            case Op::Tanh: unary([](double x) { return std::tanh(x); }); break;
            case Op::Sigmoid: unary([](double x) { return sigmoid(x); }); break;
            case Op::Exp: unary([](double x) { return std::exp(x); }); break;
            case Op::Log: unary([](double x) { return std::log(x); }); break;
            case Op::Atanh: unary([](double x) { return std::atanh(x); }); break;
            case Op::Asinh: unary([](double x) { return std::asinh(x); }); break;
            case Op::Sqrt: unary([](double x) { return std::sqrt(x); }); break;
            case Op::Relu: unary([](double x) { return x > 0.0 ? x : 0.0; }); break;
            case Op::Softplus: unary([](double x) { return softplus(x); }); break;
            case Op::Clamp: unary([&](double x) { return std::clamp(x, n.a, n.b); }); break;
            case Op::MatMul: {
                const Node& A = parent(n, 0);
                const Node& B = parent(n, 1);
                const std::size_t m = A.shape[0], k = A.shape[1];
                const std::size_t p = B.shape.rank() == 1 ? 1 : B.shape[1];
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < k; ++j) {
                        const double aij = A.value[i * k + j];
                        if (aij == 0.0) continue;
                        for (std::size_t c = 0; c < p; ++c) out[i * p + c] += aij * B.value[j * p + c];
                    }
                break;
            }
            case Op::Concat:
            case Op::Stack: {
                std::size_t off = 0;
                for (std::size_t k = 0; k < n.parent_count; ++k) {
                    const auto& v = parent(n, k).value;
                    std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
                    off += v.size();
                }
                break;
            }
            case Op::Row:
            case Op::Slice: {
                const auto& x = parent(n, 0).value;
                std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(n.index), out.size(), out.begin());
                break;
            }
            case Op::Norm: {
                const auto& x = parent(n, 0).value;
                double s = 0.0;
                for (double v : x) s += v * v;
                out[0] = std::max(std::sqrt(s), kNormFloor);
                break;
            }
            case Op::Dot: {
                const auto& x = parent(n, 0).value;
                const auto& y = parent(n, 1).value;
                out[0] = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
                break;
            }
            case Op::Sum:
            case Op::Mean: {
                const auto& x = parent(n, 0).value;
                out[0] = std::accumulate(x.begin(), x.end(), 0.0);
                if (n.op == Op::Mean) out[0] /= static_cast<double>(x.size());
                break;
            }
            case Op::Softmax:
            case Op::LogSoftmax: {
                const auto& x = parent(n, 0).value;
                const double mx = *std::max_element(x.begin(), x.end());
                double z = 0.0;
                for (double v : x) z += std::exp(v - mx);
                for (std::size_t i = 0; i < x.size(); ++i)
                    out[i] = n.op == Op::Softmax ? std::exp(x[i] - mx) / z : x[i] - mx - std::log(z);
                break;
            }
        }
        return out;
    }

    void propagate(const Node& n) {
        const auto& g = n.grad;
        auto accumulate_into = [&](std::size_t k, auto f) {
            if (!parent_needs_grad(n, k)) return;
            auto& pg = grad_of_parent(n, k);
            if (pg.size() == 1 && g.size() > 1) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) s += f(i);
                pg[0] += s;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) pg[i] += f(i);
            }
        };
        auto unary = [&](auto dfdx) {
            const auto& x = parent(n, 0).value;
            accumulate_into(0, [&](std::size_t i) { return g[i] * dfdx(x[i], n.value[i]); });
        };
        auto at = [](const std::vector<double>& v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; };

        switch (n.op) {
            case Op::Leaf: break;
            case Op::Custom: {
                std::vector<std::span<const double>> in;
                std::vector<std::span<double>> grads;
                for (std::size_t k = 0; k < n.parent_count; ++k) {
                    in.emplace_back(parent(n, k).value);
                    grads.emplace_back(parent_needs_grad(n, k) ? std::span<double>(grad_of_parent(n, k)) : std::span<double>());
                }
                n.custom->backward(in, n.value, g, grads);
                break;
            }
            case Op::Add:
                accumulate_into(0, [&](std::size_t i) { return g[i]; });
                accumulate_into(1, [&](std::size_t i) { return g[i]; });
                break;
            case Op::Sub:
                accumulate_into(0, [&](std::size_t i) { return g[i]; });
                accumulate_into(1, [&](std::size_t i) { return -g[i]; });
                break;
            case Op::Mul: {
                const auto& x = parent(n, 0).value;
                const auto& y = parent(n, 1).value;
                accumulate_into(0, [&](std::size_t i) { return g[i] * at(y, i); });
                accumulate_into(1, [&](std::size_t i) { return g[i] * at(x, i); });
                break;
            }
            case Op::Div: {
                const auto& x = parent(n, 0).value;
                const auto& y = parent(n, 1).value;
                accumulate_into(0, [&](std::size_t i) { return g[i] / at(y, i); });
                accumulate_into(1, [&](std::size_t i) {
                    const double yi = at(y, i);
                    return -g[i] * at(x, i) / (yi * yi);
                });
                break;
            }
            case Op::Neg: unary([](double, double) { return -1.0; }); break;
            case Op::AddConst: unary([](double, double) { return 1.0; }); break;
            case Op::Scale: unary([&](double, double) { return n.a; }); break;
            case Op::Tanh: unary([](double, double y) { return 1.0 - y * y; }); break;
            case Op::Sigmoid: unary([](double, double y) { return y * (1.0 - y); }); break;
            case Op::Exp: unary([](double, double y) { return y; }); break;
            case Op::Log: unary([](double x, double) { return 1.0 / x; }); break;
            case Op::Atanh: unary([](double x, double) { return 1.0 / (1.0 - x * x); }); break;
            case Op::Asinh: unary([](double x, double) { return 1.0 / std::sqrt(1.0 + x * x); }); break;
            case Op::Sqrt: unary([](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; }); break;
            case Op::Relu: unary([](double x, double) { return x > 0.0 ? 1.0 : 0.0; }); break;
            case Op::Softplus: unary([](double x, double) { return sigmoid(x); }); break;
            case Op::Clamp: unary([&](double x, double) { return (x >= n.a && x <= n.b) ? 1.0 : 0.0; }); break;
            case Op::MatMul: {
                const Node& A = parent(n, 0);
                const Node& B = parent(n, 1);
                const std::size_t m = A.shape[0], k = A.shape[1];
                const std::size_t p = B.shape.rank() == 1 ? 1 : B.shape[1];
                if (A.requires_grad) {
                    auto& gA = grad_of_parent(n, 0);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < k; ++j) {
                            double s = 0.0;
                            for (std::size_t c = 0; c < p; ++c) s += g[i * p + c] * B.value[j * p + c];
                            gA[i * k + j] += s;
                        }
                }
                if (B.requires_grad) {
                    auto& gB = grad_of_parent(n, 1);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < k; ++j) {
                            const double aij = A.value[i * k + j];
                            for (std::size_t c = 0; c < p; ++c) gB[j * p + c] += aij * g[i * p + c];
                        }
                }
                break;
            }
            case Op::Concat:
            case Op::Stack: {
                std::size_t off = 0;
                for (std::size_t k = 0; k < n.parent_count; ++k) {
                    const std::size_t len = parent(n, k).value.size();
                    if (parent_needs_grad(n, k)) {
                        auto& pg = grad_of_parent(n, k);
                        for (std::size_t i = 0; i < len; ++i) pg[i] += g[off + i];
                    }
                    off += len;
                }
                break;
            }
            case Op::Row:
            case Op::Slice: {
                if (!parent_needs_grad(n, 0)) break;
                auto& pg = grad_of_parent(n, 0);
                for (std::size_t i = 0; i < g.size(); ++i) pg[n.index + i] += g[i];
                break;
            }
            case Op::Norm: {
                const auto& x = parent(n, 0).value;
                double s = 0.0;
                for (double v : x) s += v * v;
                const double norm = std::sqrt(s);
                if (norm <= kNormFloor || !parent_needs_grad(n, 0)) break;  // floored: constant, zero subgradient
                auto& pg = grad_of_parent(n, 0);
                for (std::size_t i = 0; i < x.size(); ++i) pg[i] += g[0] * x[i] / norm;
                break;
            }
            case Op::Dot: {
                const auto& x = parent(n, 0).value;
                const auto& y = parent(n, 1).value;
                // Both operands are the same node for dot(x, x); the two passes add up to 2x.
                if (parent_needs_grad(n, 0)) {
                    auto& pg = grad_of_parent(n, 0);
                    for (std::size_t i = 0; i < y.size(); ++i) pg[i] += g[0] * y[i];
                }
                if (parent_needs_grad(n, 1)) {
                    auto& pg = grad_of_parent(n, 1);
                    for (std::size_t i = 0; i < x.size(); ++i) pg[i] += g[0] * x[i];
                }
                break;
            }
            case Op::Sum:
            case Op::Mean: {
                if (!parent_needs_grad(n, 0)) break;
                auto& pg = grad_of_parent(n, 0);
                const double scale = n.op == Op::Mean ? 1.0 / static_cast<double>(pg.size()) : 1.0;
                for (double& v : pg) v += g[0] * scale;
                break;
            }
            case Op::Softmax: {
                double s = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * n.value[i];
                accumulate_into(0, [&](std::size_t i) { return n.value[i] * (g[i] - s); });
                break;
            }
            case Op::LogSoftmax: {
                const double s = std::accumulate(g.begin(), g.end(), 0.0);
                accumulate_into(0, [&](std::size_t i) { return g[i] - std::exp(n.value[i]) * s; });
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> parent_ids_;
    std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

inline const Shape& Tensor::shape() const { return tape_->node(id_).shape; }
inline std::span<const double> Tensor::values() const { return tape_->node(id_).value; }
inline double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
    return values()[0];
}
inline std::span<const double> Tensor::grad() const { return tape_->node(id_).grad; }
inline bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

// ---------------------------------------------------------------------------
// Primitive operations

namespace detail {

inline Shape broadcast(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return a.shape();
    if (b.size() == 1) return a.shape();
    if (a.size() == 1) return b.shape();
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape().str() + " and " + b.shape().str());
}

inline void same_tape(const Tensor& a, const Tensor& b) {
    if (&a.tape() != &b.tape()) throw ContractViolation("operands live on different tapes");
}

inline Tensor binary(Op op, const Tensor& a, const Tensor& b, const char* name) {
    same_tape(a, b);
    return a.tape().record(op, broadcast(a, b, name), {a, b});
}

inline Tensor unary(Op op, const Tensor& a, double p0 = 0.0, double p1 = 0.0) {
    return a.tape().record(op, a.shape(), {a}, p0, p1);
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(Op::Add, a, b, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(Op::Sub, a, b, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(Op::Mul, a, b, "mul"); }
inline Tensor div(const Tensor& a, const Tensor& b) { return detail::binary(Op::Div, a, b, "div"); }
inline Tensor neg(const Tensor& a) { return detail::unary(Op::Neg, a); }
inline Tensor add_const(const Tensor& a, double k) { return detail::unary(Op::AddConst, a, k); }
inline Tensor scale(const Tensor& a, double k) { return detail::unary(Op::Scale, a, k); }
inline Tensor tanh(const Tensor& a) { return detail::unary(Op::Tanh, a); }
inline Tensor sigmoid(const Tensor& a) { return detail::unary(Op::Sigmoid, a); }
inline Tensor exp(const Tensor& a) { return detail::unary(Op::Exp, a); }
inline Tensor log(const Tensor& a) { return detail::unary(Op::Log, a); }
inline Tensor atanh(const Tensor& a) { return detail::unary(Op::Atanh, a); }
inline Tensor asinh(const Tensor& a) { return detail::unary(Op::Asinh, a); }
inline Tensor sqrt(const Tensor& a) { return detail::unary(Op::Sqrt, a); }
inline Tensor relu(const Tensor& a) { return detail::unary(Op::Relu, a); }
inline Tensor softplus(const Tensor& a) { return detail::unary(Op::Softplus, a); }
inline Tensor clamp(const Tensor& a, double lo, double hi) { return detail::unary(Op::Clamp, a, lo, hi); }

/// Euclidean norm of the whole tensor, floored at 1e-15.
inline Tensor norm(const Tensor& a) { return a.tape().record(Op::Norm, Shape::scalar(), {a}); }
inline Tensor sum(const Tensor& a) { return a.tape().record(Op::Sum, Shape::scalar(), {a}); }
inline Tensor mean(const Tensor& a) { return a.tape().record(Op::Mean, Shape::scalar(), {a}); }

inline Tensor dot(const Tensor& a, const Tensor& b) {
    detail::same_tape(a, b);
    if (a.size() != b.size()) throw ShapeError("dot: " + a.shape().str() + " vs " + b.shape().str());
    return a.tape().record(Op::Dot, Shape::scalar(), {a, b});
}

inline Tensor softmax(const Tensor& a) {
    if (a.shape().rank() != 1) throw ShapeError("softmax expects a vector");
    return detail::unary(Op::Softmax, a);
}

inline Tensor log_softmax(const Tensor& a) {
    if (a.shape().rank() != 1) throw ShapeError("log_softmax expects a vector");
    return detail::unary(Op::LogSoftmax, a);
}

/// [m,k] x [k] -> [m], or [m,k] x [k,p] -> [m,p].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::same_tape(a, b);
    if (a.shape().rank() != 2 || b.shape().rank() < 1 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
    const Shape out = b.shape().rank() == 1 ? Shape::vector(a.shape()[0]) : Shape::matrix(a.shape()[0], b.shape()[1]);
    return a.tape().record(Op::MatMul, out, {a, b});
}

inline Tensor concat(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t n = 0;
    for (const Tensor& t : parts) {
        if (t.shape().rank() > 1) throw ShapeError("concat expects scalars or vectors");
        n += t.size();
    }
    return parts.front().tape().record(Op::Concat, Shape::vector(n), parts);
}
inline Tensor concat(std::initializer_list<Tensor> parts) { return concat(std::span<const Tensor>(parts.begin(), parts.size())); }

/// Stack equal-length vectors as the rows of a matrix.
inline Tensor stack_rows(std::span<const Tensor> rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no operands");
    const std::size_t d = rows.front().size();
    for (const Tensor& t : rows)
        if (t.shape().rank() != 1 || t.size() != d) throw ShapeError("stack_rows: ragged rows");
    return rows.front().tape().record(Op::Stack, Shape::matrix(rows.size(), d), rows);
}

inline Tensor row(const Tensor& m, std::size_t i) {
    if (m.shape().rank() != 2 || i >= m.shape()[0]) throw ShapeError("row: index out of range");
    const std::size_t d = m.shape()[1];
    return m.tape().record(Op::Row, Shape::vector(d), {m}, 0.0, 0.0, i * d);
}

inline Tensor slice(const Tensor& v, std::size_t start, std::size_t len) {
    if (v.shape().rank() != 1 || start + len > v.size()) throw ShapeError("slice: out of range");
    return v.tape().record(Op::Slice, Shape::vector(len), {v}, 0.0, 0.0, start);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double k) { return add_const(a, k); }
inline Tensor operator+(double k, const Tensor& a) { return add_const(a, k); }
inline Tensor operator-(const Tensor& a, double k) { return add_const(a, -k); }
inline Tensor operator-(double k, const Tensor& a) { return add_const(neg(a), k); }
inline Tensor operator*(const Tensor& a, double k) { return scale(a, k); }
inline Tensor operator*(double k, const Tensor& a) { return scale(a, k); }
inline Tensor operator/(const Tensor& a, double k) { return scale(a, 1.0 / k); }
inline Tensor operator/(double k, const Tensor& a) { return div(a.tape().scalar(k), a); }

inline std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace hypersyn::ad
