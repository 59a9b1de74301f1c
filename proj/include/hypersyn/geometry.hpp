#pragma once

// Poincare-ball geometry in double precision, parameterized by a constant
// negative curvature kappa = -c. Klein and Lorentz (hyperboloid) coordinates
// are provided for aggregation and distance evaluation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hypersyn/errors.hpp"

namespace hypersyn::geo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kBallEps = 1e-5;      // projection margin
inline constexpr double kAtanhMax = 1.0 - 1e-10;
inline constexpr double kNormFloor = 1e-15;

class Curvature {
public:
    Curvature() = default;
    explicit Curvature(double kappa) : kappa_(kappa) {
        if (!(kappa < 0.0) || !std::isfinite(kappa))
            throw ContractViolation("curvature must be finite and strictly negative, got " +
                                    std::to_string(kappa));
    }

    double kappa() const noexcept { return kappa_; }
    /// |kappa|
    double c() const noexcept { return -kappa_; }
    double sqrt_c() const noexcept { return std::sqrt(-kappa_); }
    /// Largest admissible Euclidean norm inside the ball.
    double max_norm() const noexcept { return (1.0 - kBallEps) / sqrt_c(); }

    friend bool operator==(const Curvature&, const Curvature&) = default;

private:
    double kappa_ = -1.0;
};

inline double safe_norm(const Vec& v) { return std::max(v.norm(), kNormFloor); }
inline double clamp_atanh(double x) { return std::atanh(std::clamp(x, 0.0, kAtanhMax)); }

/// Rescale onto the closed ball of radius (1 - eps)/sqrt(c) if outside it.
inline Vec project_to_ball(Vec x, const Curvature& k) {
    const double n = x.norm();
    const double maxn = k.max_norm();
    if (n > maxn) x *= maxn / n;
    return x;
}

/// A point strictly inside the Poincare ball of the given curvature. The
/// constructor projects, so every instance satisfies the containment invariant.
class PoincareVector {
public:
    PoincareVector() = default;
    explicit PoincareVector(Vec coords, Curvature k = Curvature{})
        : coords_(project_to_ball(std::move(coords), k)), curvature_(k) {
        if (!coords_.allFinite()) throw ContractViolation("PoincareVector: non-finite coordinates");
    }

    static PoincareVector origin(std::size_t dim, Curvature k = Curvature{}) {
        return PoincareVector(Vec::Zero(static_cast<Eigen::Index>(dim)), k);
    }

    const Vec& coords() const noexcept { return coords_; }
    const Curvature& curvature() const noexcept { return curvature_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(coords_.size()); }

    /// Conformal factor 2 / (1 - c |x|^2).
    double lambda() const noexcept { return 2.0 / (1.0 - curvature_.c() * coords_.squaredNorm()); }

    PoincareVector operator-() const { return PoincareVector(-coords_, curvature_); }

private:
    Vec coords_;
    Curvature curvature_;
};

struct KleinVector {
    Vec coords;
    Curvature curvature;
};

/// Point on the upper sheet of <x, x>_L = -1/c; index 0 is the time coordinate.
struct LorentzVector {
    Vec coords;
    Curvature curvature;
};

namespace detail {

inline void require_same_space(const PoincareVector& x, const PoincareVector& y, const char* op) {
    if (x.dim() != y.dim())
        throw ShapeError(std::string(op) + ": dimension mismatch " + std::to_string(x.dim()) + " vs " +
                         std::to_string(y.dim()));
    if (!(x.curvature() == y.curvature())) throw ContractViolation(std::string(op) + ": curvature mismatch");
}

inline Vec mobius_add_raw(const Vec& x, const Vec& y, double c) {
    const double xy = x.dot(y);
    const double x2 = x.squaredNorm();
    const double y2 = y.squaredNorm();
    const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    return ((1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y) / std::max(den, kNormFloor);
}

}  // namespace detail

inline PoincareVector mobius_add(const PoincareVector& x, const PoincareVector& y) {
    detail::require_same_space(x, y, "mobius_add");
    return PoincareVector(detail::mobius_add_raw(x.coords(), y.coords(), x.curvature().c()), x.curvature());
}

inline PoincareVector exp_map0(const Vec& v, Curvature k = Curvature{}) {
    const double sc = k.sqrt_c();
    const double n = safe_norm(v);
    return PoincareVector(std::tanh(sc * n) / (sc * n) * v, k);
}

inline Vec log_map0(const PoincareVector& y) {
    const double sc = y.curvature().sqrt_c();
    const double n = safe_norm(y.coords());
    return clamp_atanh(sc * n) / (sc * n) * y.coords();
}

inline PoincareVector exp_map(const PoincareVector& base, const Vec& v) {
    if (static_cast<std::size_t>(v.size()) != base.dim()) throw ShapeError("exp_map: dimension mismatch");
    const double sc = base.curvature().sqrt_c();
    const double n = safe_norm(v);
    const Vec step = std::tanh(sc * base.lambda() * n / 2.0) / (sc * n) * v;
    return PoincareVector(detail::mobius_add_raw(base.coords(), step, base.curvature().c()), base.curvature());
}

inline Vec log_map(const PoincareVector& base, const PoincareVector& y) {
    detail::require_same_space(base, y, "log_map");
    const double sc = base.curvature().sqrt_c();
    const Vec w = detail::mobius_add_raw(-base.coords(), y.coords(), base.curvature().c());
    const double n = safe_norm(w);
    return 2.0 / (sc * base.lambda()) * clamp_atanh(sc * n) / n * w;
}

/// W (x) x = exp_0(W log_0(x)).
inline PoincareVector mobius_matmul(const Mat& w, const PoincareVector& x) {
    if (static_cast<std::size_t>(w.cols()) != x.dim())
        throw ShapeError("mobius_matmul: matrix has " + std::to_string(w.cols()) + " columns, point has dim " +
                         std::to_string(x.dim()));
    return exp_map0(w * log_map0(x), x.curvature());
}

/// Element-wise product conjugated through the tangent space at the origin.
inline PoincareVector mobius_pointwise(const PoincareVector& x, const PoincareVector& y) {
    detail::require_same_space(x, y, "mobius_pointwise");
    return exp_map0(log_map0(x).cwiseProduct(log_map0(y)), x.curvature());
}

inline double hyp_distance(const PoincareVector& x, const PoincareVector& y) {
    detail::require_same_space(x, y, "hyp_distance");
    const double sc = x.curvature().sqrt_c();
    const Vec w = detail::mobius_add_raw(-x.coords(), y.coords(), x.curvature().c());
    return 2.0 / sc * clamp_atanh(sc * w.norm());
}

// ---------------------------------------------------------------------------
// Model conversions

inline KleinVector to_klein(const PoincareVector& p) {
    const double c = p.curvature().c();
    return {2.0 * p.coords() / (1.0 + c * p.coords().squaredNorm()), p.curvature()};
}

inline PoincareVector from_klein(const KleinVector& k) {
    const double c = k.curvature.c();
    // Klein points past the boundary collapse onto it; the Poincare constructor then projects.
    const double s = std::max(1.0 - c * k.coords.squaredNorm(), 0.0);
    return PoincareVector(k.coords / (1.0 + std::sqrt(s)), k.curvature);
}

inline LorentzVector to_lorentz(const PoincareVector& p) {
    const double c = p.curvature().c();
    const double s = c * p.coords().squaredNorm();
    Vec out(p.coords().size() + 1);
    out(0) = (1.0 + s) / (p.curvature().sqrt_c() * (1.0 - s));
    out.tail(p.coords().size()) = 2.0 * p.coords() / (1.0 - s);
    return {out, p.curvature()};
}

inline PoincareVector from_lorentz(const LorentzVector& x) {
    const Eigen::Index d = x.coords.size() - 1;
    if (d < 0) throw ShapeError("from_lorentz: empty coordinates");
    return PoincareVector(x.coords.tail(d) / (1.0 + x.curvature.sqrt_c() * x.coords(0)), x.curvature);
}

inline double minkowski_dot(const Vec& x, const Vec& y) { return -x(0) * y(0) + x.tail(x.size() - 1).dot(y.tail(y.size() - 1)); }

/// Geodesic distance on the hyperboloid, evaluated through the Minkowski norm
/// of the chord: d = (2/sqrt c) asinh(sqrt(c <x-y, x-y>_L) / 2). Stable for
/// nearby points where acosh(-c <x,y>_L) loses half the digits.
inline double lorentz_distance(const LorentzVector& x, const LorentzVector& y) {
    if (x.coords.size() != y.coords.size()) throw ShapeError("lorentz_distance: dimension mismatch");
    const Vec diff = x.coords - y.coords;
    const double chord2 = std::max(minkowski_dot(diff, diff), 0.0);
    const double sc = x.curvature.sqrt_c();
    return 2.0 / sc * std::asinh(sc * std::sqrt(chord2) / 2.0);
}

// ---------------------------------------------------------------------------
// Aggregation

inline double lorentz_factor(const KleinVector& k) {
    return 1.0 / std::sqrt(std::max(1.0 - k.curvature.c() * k.coords.squaredNorm(), kNormFloor));
}

/// Weighted Einstein midpoint: sum_i w_i gamma_i x_i / sum_i w_i gamma_i.
inline KleinVector einstein_midpoint(std::span<const KleinVector> points, std::span<const double> weights) {
    if (points.empty()) throw ContractViolation("einstein_midpoint: empty point set");
    if (points.size() != weights.size()) throw ContractViolation("einstein_midpoint: weight count mismatch");
    const Curvature k = points.front().curvature;
    Vec acc = Vec::Zero(points.front().coords.size());
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].coords.size() != acc.size()) throw ShapeError("einstein_midpoint: dimension mismatch");
        if (weights[i] < 0.0) throw ContractViolation("einstein_midpoint: negative weight");
        const double g = weights[i] * lorentz_factor(points[i]);
        acc += g * points[i].coords;
        total += g;
    }
    if (!(total > 0.0)) throw ContractViolation("einstein_midpoint: all weights are zero");
    return {acc / total, k};
}

struct FrechetOptions {
    double tolerance = 1e-6;
    int max_iterations = 100;
};

struct FrechetResult {
    PoincareVector mean;
    int iterations = 0;
    bool converged = false;
    /// The solver did not converge; `mean` is the tangent-space mean at the origin.
    bool fallback = false;
};

namespace detail {

/// 1/2 sum_i w_i d(m, x_i)^2 with weights summing to one.
inline double frechet_objective(const PoincareVector& m, std::span<const PoincareVector> points,
                                std::span<const double> w) {
    double f = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (w[i] > 0.0) {
            const double d = hyp_distance(m, points[i]);
            f += 0.5 * w[i] * d * d;
        }
    return f;
}

}  // namespace detail

/// Riemannian gradient norm of the weighted Frechet objective at m
/// (weights are normalised internally).
inline double frechet_gradient_norm(const PoincareVector& m, std::span<const PoincareVector> points,
                                    std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    Vec g = Vec::Zero(m.coords().size());
    for (std::size_t i = 0; i < points.size(); ++i)
        if (weights[i] > 0.0) g -= weights[i] / total * log_map(m, points[i]);
    return m.lambda() * g.norm();
}

/// Hessian of the weighted Frechet objective at m as a linear map on ambient
/// tangent vectors, together with sum_i w_i log_m(x_i) (weights normalised
/// internally). The Hessian of d(., x)^2 / 2 has eigenvalue 1 along the
/// geodesic to x and sqrt(c) d coth(sqrt(c) d) across it.
inline std::pair<Mat, Vec> frechet_newton_system(const PoincareVector& m, std::span<const PoincareVector> points,
                                                 std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const auto n = m.coords().size();
    const double sc = m.curvature().sqrt_c();
    Vec g = Vec::Zero(n);
    Mat H = Mat::Zero(n, n);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        const double w = weights[i] / total;
        const Vec v = log_map(m, points[i]);
        g += w * v;
        const double vn = v.norm();
        const double d = sc * m.lambda() * vn;
        const double across = d < 1e-8 ? 1.0 : d / std::tanh(d);
        H.diagonal().array() += w * across;
        if (vn > kNormFloor) {
            const Vec u = v / vn;
            H.noalias() += w * (1.0 - across) * u * u.transpose();
        }
    }
    return {H, g};
}

/// Weighted Frechet mean by Riemannian Newton iterations from the
/// tangent-space mean at the origin, with a backtracking line search on the
/// objective. Points with zero weight are ignored. Convergence is declared when the Riemannian gradient
/// norm falls below the tolerance.
inline FrechetResult frechet_mean(std::span<const PoincareVector> points, std::span<const double> weights,
                                  const FrechetOptions& opts = {}) {
    if (points.empty()) throw ContractViolation("frechet_mean: empty point set");
    if (points.size() != weights.size()) throw ContractViolation("frechet_mean: weight count mismatch");
    const Curvature k = points.front().curvature();
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ContractViolation("frechet_mean: negative weight");
        total += w;
    }
    if (!(total > 0.0)) throw ContractViolation("frechet_mean: all weights are zero");
    std::vector<double> w(weights.begin(), weights.end());
    for (double& x : w) x /= total;

    Vec tangent = Vec::Zero(points.front().coords().size());
    std::size_t active = 0, last = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        detail::require_same_space(points.front(), points[i], "frechet_mean");
        if (w[i] > 0.0) {
            tangent += w[i] * log_map0(points[i]);
            ++active;
            last = i;
        }
    }
    if (active == 1) return {points[last], 0, true, false};
    const PoincareVector origin_mean = exp_map0(tangent, k);

    PoincareVector m = origin_mean;
    double f = detail::frechet_objective(m, points, w);
    for (int it = 0; it < opts.max_iterations; ++it) {
        const auto [H, g] = frechet_newton_system(m, points, w);
        if (m.lambda() * g.norm() < opts.tolerance) return {m, it, true, false};
        const Vec step = H.ldlt().solve(g);
        double t = 1.0;
        PoincareVector next = exp_map(m, step);
        double fn = detail::frechet_objective(next, points, w);
        // Once the predicted decrease is below what the objective resolves in
        // double precision, take full Newton steps.
        const double predicted = 0.5 * m.lambda() * m.lambda() * g.dot(step);
        if (predicted < 1e-10 * (1.0 + f)) {
            m = next;
            f = fn;
            continue;
        }
        const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + f);
        for (int halvings = 0; fn > f + slack && halvings < 40; ++halvings) {
            t *= 0.5;
            next = exp_map(m, t * step);
            fn = detail::frechet_objective(next, points, w);
        }
        if (fn > f + slack) break;
        m = next;
        f = fn;
    }
    if (frechet_gradient_norm(m, points, w) < opts.tolerance) return {m, opts.max_iterations, true, false};
    return {origin_mean, opts.max_iterations, false, true};
}

}  // namespace hypersyn::geo
