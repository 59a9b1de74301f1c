#pragma once

// Differentiable Poincare-ball operations recorded on an autodiff tape. These
// mirror hypersyn::geo one for one; the curvature magnitude c = -kappa is a
// scalar tensor so it can be learned.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hypersyn/autodiff.hpp"
#include "hypersyn/geometry.hpp"

namespace hypersyn::hyp {

using ad::Tensor;

inline Tensor max_norm(const Tensor& c) { return (1.0 - geo::kBallEps) / ad::sqrt(c); }

/// Radial rescale onto the ball of radius (1 - eps)/sqrt(c). The branch is
/// taken on values, so inside the ball this is the identity and outside it the
/// gradient is the exact Jacobian of the rescale.
inline Tensor project(const Tensor& x, const Tensor& c) {
    const Tensor n = ad::norm(x);
    const Tensor maxn = max_norm(c);
    if (n.item() > maxn.item()) return x * (maxn / n);
    return x;
}

/// Element-by-element compositions of the three hot-path maps. The fused
/// versions below must agree with these in value and gradient.
namespace reference {

inline Tensor mobius_add(const Tensor& x, const Tensor& y, const Tensor& c) {
    if (x.size() != y.size()) throw ShapeError("mobius_add: dimension mismatch");
    const Tensor xy = ad::dot(x, y);
    const Tensor x2 = ad::dot(x, x);
    const Tensor y2 = ad::dot(y, y);
    const Tensor two_cxy = 2.0 * c * xy;
    const Tensor num = (1.0 + two_cxy + c * y2) * x + (1.0 - c * x2) * y;
    const Tensor den = 1.0 + two_cxy + c * c * x2 * y2;
    return project(num / den, c);
}

inline Tensor exp_map0(const Tensor& v, const Tensor& c) {
    const Tensor scn = ad::sqrt(c) * ad::norm(v);
    return project(ad::tanh(scn) / scn * v, c);
}

inline Tensor log_map0(const Tensor& y, const Tensor& c) {
    const Tensor scn = ad::sqrt(c) * ad::norm(y);
    return ad::atanh(ad::clamp(scn, 0.0, geo::kAtanhMax)) / scn * y;
}

}  // namespace reference

namespace detail {

using Span = std::span<const double>;

inline double dotp(Span a, Span b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Rescale `r` in place onto the ball if needed; returns the factor applied.
inline double project_inplace(std::vector<double>& r, double c) {
    const double n = std::sqrt(dotp(r, r));
    const double maxn = (1.0 - geo::kBallEps) / std::sqrt(c);
    if (!(n > maxn)) return 1.0;
    const double f = maxn / n;
    for (double& v : r) v *= f;
    return f;
}

/// Pull a gradient back through the projection. `out` is the projected
/// value, `g` the incoming gradient; returns the gradient with respect to the
/// unprojected vector and adds the curvature term into `gc`.
inline std::vector<double> project_backward(Span out, Span g, double scale, double c, double& gc) {
    std::vector<double> gr(g.begin(), g.end());
    if (scale == 1.0) return gr;
    const double maxn = (1.0 - geo::kBallEps) / std::sqrt(c);
    // out = r maxn / |r|; u = out / maxn is the unit direction of r.
    double gu = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gu += g[i] * out[i] / maxn;
    for (std::size_t i = 0; i < g.size(); ++i) gr[i] = scale * (g[i] - gu * out[i] / maxn);
    gc += gu * (-0.5 * maxn / c);
    return gr;
}

struct MobiusAddFn final : ad::CustomFunction {
    static std::vector<double> raw(Span x, Span y, double c, double* scale) {
        const double xy = dotp(x, y), x2 = dotp(x, x), y2 = dotp(y, y);
        const double a = 1.0 + 2.0 * c * xy + c * y2;
        const double b = 1.0 - c * x2;
        const double D = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = (a * x[i] + b * y[i]) / D;
        const double f = project_inplace(r, c);
        if (scale) *scale = f;
        return r;
    }
    std::vector<double> forward(std::span<const Span> in) const override { return raw(in[0], in[1], in[2][0], nullptr); }
    void backward(std::span<const Span> in, Span out, Span g, std::span<const std::span<double>> grads) const override {
        const Span x = in[0], y = in[1];
        const double c = in[2][0];
        const double xy = dotp(x, y), x2 = dotp(x, x), y2 = dotp(y, y);
        const double a = 1.0 + 2.0 * c * xy + c * y2;
        const double b = 1.0 - c * x2;
        const double D = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
        double rr = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = (a * x[i] + b * y[i]) / D;
            rr += r * r;
        }
        const double maxn = (1.0 - geo::kBallEps) / std::sqrt(c);
        const double scale = std::sqrt(rr) > maxn ? maxn / std::sqrt(rr) : 1.0;
        double gc = 0.0;
        const auto gr = project_backward(out, g, scale, c, gc);
        double gnum_x = 0.0, gnum_y = 0.0, gnum_num = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            gnum_x += gr[i] * x[i];
            gnum_y += gr[i] * y[i];
            gnum_num += gr[i] * (a * x[i] + b * y[i]);
        }
        gnum_x /= D;
        gnum_y /= D;
        const double gD = -gnum_num / (D * D);
        const double ga = gnum_x, gb = gnum_y;
        const double gxy = 2.0 * c * ga + 2.0 * c * gD;
        const double gx2 = -c * gb + gD * c * c * y2;
        const double gy2 = c * ga + gD * c * c * x2;
        gc += ga * (2.0 * xy + y2) - gb * x2 + gD * (2.0 * xy + 2.0 * c * x2 * y2);
        if (!grads[0].empty())
            for (std::size_t i = 0; i < x.size(); ++i) grads[0][i] += a * gr[i] / D + gxy * y[i] + 2.0 * gx2 * x[i];
        if (!grads[1].empty())
            for (std::size_t i = 0; i < y.size(); ++i) grads[1][i] += b * gr[i] / D + gxy * x[i] + 2.0 * gy2 * y[i];
        if (!grads[2].empty()) grads[2][0] += gc;
    }
};

struct ExpMap0Fn final : ad::CustomFunction {
    std::vector<double> forward(std::span<const Span> in) const override {
        const Span v = in[0];
        const double c = in[1][0];
        const double n = std::max(std::sqrt(dotp(v, v)), geo::kNormFloor);
        const double s = std::sqrt(c) * n;
        const double phi = std::tanh(s) / s;
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = phi * v[i];
        project_inplace(r, c);
        return r;
    }
    void backward(std::span<const Span> in, Span out, Span g, std::span<const std::span<double>> grads) const override {
        const Span v = in[0];
        const double c = in[1][0];
        const double raw_n = std::sqrt(dotp(v, v));
        const double n = std::max(raw_n, geo::kNormFloor);
        const double sc = std::sqrt(c);
        const double s = sc * n;
        const double th = std::tanh(s);
        const double phi = th / s;
        const double dphi = s < 1e-4 ? -2.0 * s / 3.0 : ((1.0 - th * th) * s - th) / (s * s);
        const double maxn = (1.0 - geo::kBallEps) / sc;
        const double scale = phi * n > maxn ? maxn / (phi * n) : 1.0;
        double gc = 0.0;
        const auto gr = project_backward(out, g, scale, c, gc);
        double gv = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) gv += gr[i] * v[i];
        const double gs = gv * dphi;
        if (!grads[0].empty())
            for (std::size_t i = 0; i < v.size(); ++i)
                grads[0][i] += phi * gr[i] + (raw_n > geo::kNormFloor ? gs * sc * v[i] / n : 0.0);
        if (!grads[1].empty()) grads[1][0] += gc + gs * n / (2.0 * sc);
    }
};

struct LogMap0Fn final : ad::CustomFunction {
    std::vector<double> forward(std::span<const Span> in) const override {
        const Span y = in[0];
        const double c = in[1][0];
        const double n = std::max(std::sqrt(dotp(y, y)), geo::kNormFloor);
        const double s = std::sqrt(c) * n;
        const double psi = std::atanh(std::clamp(s, 0.0, geo::kAtanhMax)) / s;
        std::vector<double> r(y.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = psi * y[i];
        return r;
    }
    void backward(std::span<const Span> in, Span, Span g, std::span<const std::span<double>> grads) const override {
        const Span y = in[0];
        const double c = in[1][0];
        const double raw_n = std::sqrt(dotp(y, y));
        const double n = std::max(raw_n, geo::kNormFloor);
        const double sc = std::sqrt(c);
        const double s = sc * n;
        const bool clamped = s > geo::kAtanhMax;
        const double at = std::atanh(std::min(s, geo::kAtanhMax));
        const double psi = at / s;
        double dpsi;
        if (clamped) dpsi = -at / (s * s);
        else if (s < 1e-4) dpsi = 2.0 * s / 3.0;
        else dpsi = (s / (1.0 - s * s) - at) / (s * s);
        double gy = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) gy += g[i] * y[i];
        const double gs = gy * dpsi;
        if (!grads[0].empty())
            for (std::size_t i = 0; i < y.size(); ++i)
                grads[0][i] += psi * g[i] + (raw_n > geo::kNormFloor ? gs * sc * y[i] / n : 0.0);
        if (!grads[1].empty()) grads[1][0] += gs * n / (2.0 * sc);
    }
};

template <typename F>
inline Tensor call(const Tensor& a, const Tensor& b, const Tensor& c, std::size_t n) {
    static const auto fn = std::make_shared<const F>();
    const std::array<Tensor, 3> in{a, b, c};
    return a.tape().record_custom(fn, ad::Shape::vector(n), in);
}

template <typename F>
inline Tensor call(const Tensor& a, const Tensor& c, std::size_t n) {
    static const auto fn = std::make_shared<const F>();
    const std::array<Tensor, 2> in{a, c};
    return a.tape().record_custom(fn, ad::Shape::vector(n), in);
}

}  // namespace detail

inline Tensor mobius_add(const Tensor& x, const Tensor& y, const Tensor& c) {
    if (x.size() != y.size()) throw ShapeError("mobius_add: dimension mismatch");
    return detail::call<detail::MobiusAddFn>(x, y, c, x.size());
}

inline Tensor exp_map0(const Tensor& v, const Tensor& c) { return detail::call<detail::ExpMap0Fn>(v, c, v.size()); }

inline Tensor log_map0(const Tensor& y, const Tensor& c) { return detail::call<detail::LogMap0Fn>(y, c, y.size()); }

inline Tensor conformal_factor(const Tensor& x, const Tensor& c) { return 2.0 / (1.0 - c * ad::dot(x, x)); }

inline Tensor exp_map(const Tensor& base, const Tensor& v, const Tensor& c) {
    const Tensor sc = ad::sqrt(c);
    const Tensor n = ad::norm(v);
    const Tensor step = ad::tanh(sc * conformal_factor(base, c) * n * 0.5) / (sc * n) * v;
    return mobius_add(base, step, c);
}

inline Tensor log_map(const Tensor& base, const Tensor& y, const Tensor& c) {
    const Tensor sc = ad::sqrt(c);
    const Tensor w = mobius_add(-base, y, c);
    const Tensor n = ad::norm(w);
    const Tensor scale = 2.0 / (sc * conformal_factor(base, c)) * ad::atanh(ad::clamp(sc * n, 0.0, geo::kAtanhMax)) / n;
    return scale * w;
}

inline Tensor mobius_matvec(const Tensor& w, const Tensor& x, const Tensor& c) {
    return exp_map0(ad::matmul(w, log_map0(x, c)), c);
}

inline Tensor mobius_pointwise(const Tensor& x, const Tensor& y, const Tensor& c) {
    if (x.size() != y.size()) throw ShapeError("mobius_pointwise: dimension mismatch");
    return exp_map0(log_map0(x, c) * log_map0(y, c), c);
}

inline Tensor distance(const Tensor& x, const Tensor& y, const Tensor& c) {
    const Tensor sc = ad::sqrt(c);
    const Tensor w = mobius_add(-x, y, c);
    return 2.0 / sc * ad::atanh(ad::clamp(sc * ad::norm(w), 0.0, geo::kAtanhMax));
}

inline Tensor to_klein(const Tensor& p, const Tensor& c) { return 2.0 * p / (1.0 + c * ad::dot(p, p)); }

inline Tensor from_klein(const Tensor& k, const Tensor& c) {
    const Tensor s = ad::clamp(1.0 - c * ad::dot(k, k), 0.0, 1.0);
    return project(k / (1.0 + ad::sqrt(s)), c);
}

inline Tensor to_lorentz(const Tensor& p, const Tensor& c) {
    const Tensor s = c * ad::dot(p, p);
    const Tensor time = (1.0 + s) / (ad::sqrt(c) * (1.0 - s));
    return ad::concat({time, 2.0 * p / (1.0 - s)});
}

inline Tensor from_lorentz(const Tensor& x, const Tensor& c) {
    const std::size_t d = x.size() - 1;
    return project(ad::slice(x, 1, d) / (1.0 + ad::sqrt(c) * ad::slice(x, 0, 1)), c);
}

/// Chord-based hyperboloid distance; see geo::lorentz_distance.
inline Tensor lorentz_distance(const Tensor& x, const Tensor& y, const Tensor& c) {
    const Tensor diff = x - y;
    const std::size_t d = diff.size() - 1;
    const Tensor t = ad::slice(diff, 0, 1);
    const Tensor s = ad::slice(diff, 1, d);
    const Tensor chord2 = ad::clamp(ad::dot(s, s) - ad::dot(t, t), geo::kNormFloor, 1e300);
    const Tensor sc = ad::sqrt(c);
    return 2.0 / sc * ad::asinh(sc * ad::sqrt(chord2) * 0.5);
}

/// Lorentz-factor-weighted average of Klein points. `weights` are scalars.
inline Tensor einstein_midpoint(std::span<const Tensor> klein_points, std::span<const Tensor> weights, const Tensor& c) {
    if (klein_points.empty()) throw ContractViolation("einstein_midpoint: empty point set");
    if (klein_points.size() != weights.size()) throw ContractViolation("einstein_midpoint: weight count mismatch");
    Tensor num, den;
    for (std::size_t i = 0; i < klein_points.size(); ++i) {
        const Tensor& k = klein_points[i];
        const Tensor gamma = 1.0 / ad::sqrt(ad::clamp(1.0 - c * ad::dot(k, k), geo::kNormFloor, 1.0));
        const Tensor w = weights[i] * gamma;
        num = num.valid() ? num + w * k : w * k;
        den = den.valid() ? den + w : w;
    }
    if (!(den.item() > 0.0)) throw ContractViolation("einstein_midpoint: all weights are zero");
    return num / den;
}

struct FrechetOutput {
    Tensor mean;
    int iterations = 0;
    bool converged = false;
    bool fallback = false;
};

namespace detail {

/// Frechet mean as one tape node. Inputs are the active points followed by
/// the curvature magnitude. The value comes from geo::frechet_mean; the
/// gradient follows from the implicit function theorem applied to the
/// stationarity condition sum_i w_i log_m(x_i) = 0, with the input Jacobians
/// taken on a scratch tape. When the solver falls back to the tangent-space mean at the
/// origin, that formula is differentiated instead.
class FrechetFunction final : public ad::CustomFunction {
public:
    FrechetFunction(std::vector<double> weights, geo::FrechetOptions opts, bool fallback)
        : w_(std::move(weights)), opts_(opts), fallback_(fallback) {}

    static geo::FrechetResult solve(std::span<const std::span<const double>> in, std::span<const double> w,
                                    const geo::FrechetOptions& opts) {
        const std::size_t k = in.size() - 1;
        const geo::Curvature curv(-in[k][0]);
        std::vector<geo::PoincareVector> pts;
        pts.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            for (double v : in[i])
                if (!std::isfinite(v)) throw NumericalError("frechet_mean: non-finite input point");
            pts.emplace_back(Eigen::Map<const geo::Vec>(in[i].data(), static_cast<Eigen::Index>(in[i].size())), curv);
        }
        return geo::frechet_mean(pts, w, opts);
    }

    std::vector<double> forward(std::span<const std::span<const double>> in) const override {
        const auto r = solve(in, w_, opts_);
        return {r.mean.coords().data(), r.mean.coords().data() + r.mean.coords().size()};
    }

    void backward(std::span<const std::span<const double>> in, std::span<const double> out,
                  std::span<const double> grad_out, std::span<const std::span<double>> grads) const override {
        const std::size_t k = in.size() - 1;
        const std::size_t n = out.size();
        ad::Tape t;
        std::vector<Tensor> x;
        x.reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            x.push_back(t.variable({in[i].begin(), in[i].end()}, ad::Shape::vector(n)));
        const Tensor c = t.variable({in[k][0]}, ad::Shape::scalar());
        auto read = [&](const Tensor& v, std::span<double> dst, double sign) {
            const auto g = v.grad();
            if (dst.empty() || g.empty()) return;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += sign * g[i];
        };

        if (fallback_) {
            Tensor tangent;
            for (std::size_t i = 0; i < k; ++i) {
                const Tensor l = w_[i] * log_map0(x[i], c);
                tangent = tangent.valid() ? tangent + l : l;
            }
            const Tensor m = exp_map0(tangent, c);
            t.backward(ad::dot(t.constant(grad_out), m));
            for (std::size_t i = 0; i <= k; ++i) read(i < k ? x[i] : c, grads[i], 1.0);
            return;
        }

        // At the mean, d/dm sum_i w_i log_m(x_i) = -H with H the Hessian of the
        // objective, so the adjoint is H^-1 grad_out.
        const geo::Curvature curv(-in[k][0]);
        std::vector<geo::PoincareVector> pts;
        pts.reserve(k);
        for (std::size_t i = 0; i < k; ++i)
            pts.emplace_back(Eigen::Map<const geo::Vec>(in[i].data(), static_cast<Eigen::Index>(n)), curv);
        const geo::PoincareVector mean(Eigen::Map<const geo::Vec>(out.data(), static_cast<Eigen::Index>(n)), curv);
        const geo::Mat H = geo::frechet_newton_system(mean, pts, w_).first;
        const geo::Vec go = Eigen::Map<const geo::Vec>(grad_out.data(), static_cast<Eigen::Index>(n));
        const geo::Vec mu = H.ldlt().solve(go);

        const Tensor m = t.constant(out);
        Tensor F;
        for (std::size_t i = 0; i < k; ++i) {
            const Tensor l = w_[i] * log_map(m, x[i], c);
            F = F.valid() ? F + l : l;
        }
        t.backward(ad::dot(t.constant(std::span<const double>(mu.data(), n)), F));
        for (std::size_t i = 0; i <= k; ++i) read(i < k ? x[i] : c, grads[i], 1.0);
    }

private:
    std::vector<double> w_;
    geo::FrechetOptions opts_;
    bool fallback_;
};

}  // namespace detail

/// Weighted Frechet mean of ball points, differentiable in the points and the
/// curvature. Zero-weight points are skipped.
inline FrechetOutput frechet_mean(std::span<const Tensor> points, std::span<const double> weights, const Tensor& c,
                                  const geo::FrechetOptions& opts = {}) {
    if (points.empty()) throw ContractViolation("frechet_mean: empty point set");
    if (points.size() != weights.size()) throw ContractViolation("frechet_mean: weight count mismatch");
    std::vector<Tensor> active;
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (weights[i] < 0.0) throw ContractViolation("frechet_mean: negative weight");
        if (weights[i] > 0.0) {
            active.push_back(points[i]);
            w.push_back(weights[i]);
            total += weights[i];
        }
    }
    if (active.empty()) throw ContractViolation("frechet_mean: all weights are zero");
    if (active.size() == 1) return {active.front(), 0, true, false};
    for (double& x : w) x /= total;

    std::vector<std::span<const double>> in;
    for (const Tensor& p : active) in.push_back(p.values());
    in.push_back(c.values());
    const auto r = detail::FrechetFunction::solve(in, w, opts);
    const std::size_t n = active.front().size();
    active.push_back(c);
    auto fn = std::make_shared<detail::FrechetFunction>(std::move(w), opts, r.fallback);
    const auto& mc = r.mean.coords();
    const Tensor m = c.tape().record_custom(std::move(fn), ad::Shape::vector(n), active,
                                            std::vector<double>(mc.data(), mc.data() + mc.size()));
    return {m, r.iterations, r.converged, r.fallback};
}

// ---------------------------------------------------------------------------

/// The arithmetic a layer runs in. Hyperbolic mode uses Mobius operations on
/// the Poincare ball of curvature -c; Euclidean mode swaps in +, matrix
/// product, element-wise product, and identity exp/log maps.
struct Space {
    Tensor c;  // curvature magnitude, scalar; unused in Euclidean mode
    bool euclidean = false;

    static Space hyperbolic(ad::Tape& tape, double curvature_magnitude = 1.0) {
        return {tape.scalar(curvature_magnitude), false};
    }
    static Space flat(ad::Tape& tape) { return {tape.scalar(1.0), true}; }

    Tensor add(const Tensor& x, const Tensor& y) const { return euclidean ? x + y : mobius_add(x, y, c); }
    Tensor matvec(const Tensor& w, const Tensor& x) const {
        return euclidean ? ad::matmul(w, x) : mobius_matvec(w, x, c);
    }
    /// W (x) x given v = log0(x) already in hand: exp0(W v).
    Tensor lin(const Tensor& w, const Tensor& log_x) const {
        const Tensor y = ad::matmul(w, log_x);
        return euclidean ? y : exp_map0(y, c);
    }
    Tensor origin(std::size_t dim) const { return c.tape().zeros(dim); }
    Tensor pointwise(const Tensor& x, const Tensor& y) const {
        return euclidean ? x * y : mobius_pointwise(x, y, c);
    }
    Tensor exp0(const Tensor& v) const { return euclidean ? v : exp_map0(v, c); }
    Tensor log0(const Tensor& x) const { return euclidean ? x : log_map0(x, c); }
    Tensor exp(const Tensor& base, const Tensor& v) const { return euclidean ? base + v : exp_map(base, v, c); }
    Tensor log(const Tensor& base, const Tensor& y) const { return euclidean ? y - base : log_map(base, y, c); }
    Tensor dist(const Tensor& x, const Tensor& y) const {
        if (euclidean) {
            const Tensor d = x - y;
            return ad::sqrt(ad::clamp(ad::dot(d, d), geo::kNormFloor, 1e300));
        }
        return distance(x, y, c);
    }

    /// diag(g) (x) y for a gate vector g living in the tangent space.
    Tensor gate(const Tensor& g, const Tensor& y) const { return euclidean ? g * y : exp_map0(g * log_map0(y, c), c); }

    /// Weighted midpoint of ball points: Einstein midpoint in Klein
    /// coordinates, or the weighted arithmetic mean in Euclidean mode.
    Tensor midpoint(std::span<const Tensor> points, std::span<const Tensor> weights) const {
        if (euclidean) {
            Tensor num, den;
            for (std::size_t i = 0; i < points.size(); ++i) {
                num = num.valid() ? num + weights[i] * points[i] : weights[i] * points[i];
                den = den.valid() ? den + weights[i] : weights[i];
            }
            if (!num.valid()) throw ContractViolation("midpoint: empty point set");
            return num / den;
        }
        std::vector<Tensor> klein;
        klein.reserve(points.size());
        for (const Tensor& p : points) klein.push_back(to_klein(p, c));
        return from_klein(einstein_midpoint(klein, weights, c), c);
    }

    /// Unweighted midpoint.
    Tensor midpoint(std::span<const Tensor> points) const {
        if (points.empty()) throw ContractViolation("midpoint: empty point set");
        std::vector<Tensor> w(points.size(), points.front().tape().scalar(1.0));
        return midpoint(points, w);
    }

    FrechetOutput frechet(std::span<const Tensor> points, std::span<const double> weights,
                          const geo::FrechetOptions& opts) const {
        if (!euclidean) return frechet_mean(points, weights, c, opts);
        Tensor num;
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            num = num.valid() ? num + weights[i] * points[i] : weights[i] * points[i];
            total += weights[i];
        }
        if (!num.valid()) throw ContractViolation("frechet: all weights are zero");
        return {num / total, 0, true, false};
    }

    Tensor project(const Tensor& x) const { return euclidean ? x : hyp::project(x, c); }
};

}  // namespace hypersyn::hyp
